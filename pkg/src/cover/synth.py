"""Synthetic score benchmark exhibiting the confidence-mutation structure.

Generates ID/OOD detector scores directly, without images or a model, so
the statistical mechanism can be demonstrated at desk scale: corruption
drops confident scores more than unconfident ones, and drops overconfident
OOD scores hardest.  Averaging the original and corrupted score then beats
either alone on FPR at matched TPR.

The mutation_gap knob scales every corruption effect.  At gap 0 the drop
law is identical for both splits and nearly zero, so all three input modes
(original-only, corrupted-only, averaged) perform the same within sampling
noise; that null case is part of the contract, not an accident.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.special import expit

from .gmm import portable_normal
from .metrics import EvalResult, ScoredSplit, evaluate
from .rng import stream

# ID original scores: a confident mode and an unconfident mode.
ID_WEIGHT_HIGH = 0.65
ID_HIGH = (0.88, 0.06)
ID_LOW = (0.60, 0.10)

# OOD original scores: a small overconfident mode above the bulk.
OOD_WEIGHT_OVER = 0.18
OOD_OVER = (0.58, 0.07)
OOD_BULK = (0.43, 0.12)

# Gap-independent jitter: tiny, positively correlated with the original
# score so that averaging cannot inflate the ID variance even at gap 0.
BASE_DROP_SCALE = 0.01

# Gap-scaled drop law: a deterministic pull proportional to confidence
# above the knee, plus noise that turns on only near the top of the range.
DROP_SLOPE = 1.5
DROP_KNEE = 0.52
NOISE_COEF = 0.6
NOISE_CENTER = 0.78
NOISE_WIDTH = 0.04

# Overconfident OOD samples additionally lose the full gap.
OVERCONF_EXTRA = 1.0


def _one_split(seed: int, tag: str, n: int, mutation_gap: float) -> tuple:
    gen = stream(seed, "synth", tag)
    u_comp = gen.random(n)
    z_orig = portable_normal(gen, n)
    if tag == "id":
        hi = u_comp < ID_WEIGHT_HIGH
        orig = np.where(
            hi, ID_HIGH[0] + ID_HIGH[1] * z_orig, ID_LOW[0] + ID_LOW[1] * z_orig
        )
        extra_mask = np.zeros(n, dtype=bool)
    else:
        over = u_comp < OOD_WEIGHT_OVER
        orig = np.where(
            over, OOD_OVER[0] + OOD_OVER[1] * z_orig, OOD_BULK[0] + OOD_BULK[1] * z_orig
        )
        extra_mask = over
    orig = np.clip(orig, 0.0, 1.0)

    z_base = portable_normal(gen, n)
    drop = BASE_DROP_SCALE * np.abs(z_base) * (0.5 + orig)
    z_gap = portable_normal(gen, n)
    noise_sigma = NOISE_COEF * expit((orig - NOISE_CENTER) / NOISE_WIDTH)
    drop = drop + mutation_gap * (
        DROP_SLOPE * np.maximum(orig - DROP_KNEE, 0.0) + z_gap * noise_sigma
    )
    drop = drop + mutation_gap * OVERCONF_EXTRA * extra_mask
    corrupted = np.clip(orig - drop, 0.0, 1.0)
    return orig, corrupted


def gen_synthetic_benchmark(
    n_id: int, n_ood: int, mutation_gap: float, seed: int = 0
) -> tuple:
    """Generate (original ScoredSplit, corrupted ScoredSplit).

    Fully seeded; the two splits draw from independent streams, so n_id
    never shifts the OOD draws.
    """
    if mutation_gap < 0:
        raise ValueError(f"mutation_gap must be non-negative, got {mutation_gap}")
    if n_id < 1 or n_ood < 1:
        raise ValueError("need at least one sample per split")
    id_orig, id_corr = _one_split(seed, "id", n_id, mutation_gap)
    ood_orig, ood_corr = _one_split(seed, "ood", n_ood, mutation_gap)
    return (
        ScoredSplit(id_scores=id_orig, ood_scores=ood_orig),
        ScoredSplit(id_scores=id_corr, ood_scores=ood_corr),
    )


@dataclasses.dataclass(frozen=True)
class ExperimentResult:
    original: EvalResult
    corrupted: EvalResult
    averaged: EvalResult
    var_original_id: float
    var_averaged_id: float

    def to_dict(self) -> dict:
        return {
            "original": self.original.to_dict(),
            "corrupted": self.corrupted.to_dict(),
            "averaged": self.averaged.to_dict(),
            "var_original_id": self.var_original_id,
            "var_averaged_id": self.var_averaged_id,
        }


def run_cover_experiment(benchmark: tuple, tpr: float = 0.95) -> ExperimentResult:
    """Evaluate original-only, corrupted-only, and averaged score inputs."""
    original, corrupted = benchmark
    averaged = ScoredSplit(
        id_scores=(original.id_scores + corrupted.id_scores) / 2.0,
        ood_scores=(original.ood_scores + corrupted.ood_scores) / 2.0,
    )
    return ExperimentResult(
        original=evaluate(original, tpr),
        corrupted=evaluate(corrupted, tpr),
        averaged=evaluate(averaged, tpr),
        var_original_id=float(np.var(original.id_scores)),
        var_averaged_id=float(np.var(averaged.id_scores)),
    )
