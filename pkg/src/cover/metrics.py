"""Threshold calibration and the FPR/AUROC evaluation metrics.

Convention throughout: higher score means in-distribution, and a sample
exactly at the threshold counts as ID.  The threshold for a target TPR is
the largest observed ID score that still admits the target fraction, found
by a definitional sweep rather than index arithmetic, so no floating-point
rounding of n*tpr can shift the answer.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import EmptyInput, NonFinite


def _scores(seq, name: str) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size and not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} contain non-finite values")
    return arr


@dataclasses.dataclass(frozen=True)
class ScoredSplit:
    """Detector scores for the ID samples and the OOD samples."""

    id_scores: np.ndarray
    ood_scores: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "id_scores", _scores(self.id_scores, "id_scores"))
        object.__setattr__(self, "ood_scores", _scores(self.ood_scores, "ood_scores"))


@dataclasses.dataclass(frozen=True)
class EvalResult:
    auroc: float
    fpr_at_tpr: float
    threshold: float
    tpr_target: float = 0.95

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def calibrate_threshold(id_scores, tpr_target: float = 0.95) -> float:
    """Largest observed score t with fraction(id_scores >= t) >= tpr_target.

    The fraction admitted is non-increasing in t, so the sweep over unique
    observed values picks the highest one still meeting the target; the
    minimum always qualifies, so a result exists for any target in (0, 1).
    """
    if not 0.0 < tpr_target < 1.0:
        raise ValueError(f"tpr_target must be in (0,1), got {tpr_target}")
    arr = _scores(id_scores, "id_scores")
    if arr.size == 0:
        raise EmptyInput("id_scores is empty")
    ordered = np.sort(arr)
    candidates = np.unique(ordered)
    admitted = arr.size - np.searchsorted(ordered, candidates, side="left")
    ok = admitted >= tpr_target * arr.size
    return float(candidates[np.nonzero(ok)[0][-1]])


def detect(score: float, threshold: float) -> str:
    """'id' iff score >= threshold (boundary counts as ID), else 'ood'."""
    if not (np.isfinite(score) and np.isfinite(threshold)):
        raise NonFinite("detect needs finite score and threshold")
    return "id" if score >= threshold else "ood"


def fpr_at_tpr(split: ScoredSplit, tpr_target: float = 0.95) -> float:
    """Fraction of OOD scores at or above the TPR-calibrated threshold."""
    if split.ood_scores.size == 0:
        raise EmptyInput("ood_scores is empty")
    thr = calibrate_threshold(split.id_scores, tpr_target)
    return float(np.mean(split.ood_scores >= thr))


def auroc(split: ScoredSplit) -> float:
    """P(random ID score > random OOD score), ties counted half.

    Computed from average ranks of the pooled scores (the Mann-Whitney U
    statistic over n_id * n_ood); equivalent to trapezoidal integration of
    the ROC curve, without materializing it.
    """
    n_id = split.id_scores.size
    n_ood = split.ood_scores.size
    if n_id == 0 or n_ood == 0:
        raise EmptyInput("auroc needs non-empty id and ood scores")
    pooled = np.concatenate([split.id_scores, split.ood_scores])
    _, inverse, counts = np.unique(pooled, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    avg_rank = (starts + ends) / 2.0
    id_rank_sum = avg_rank[inverse[:n_id]].sum()
    u = id_rank_sum - n_id * (n_id + 1) / 2.0
    return float(u / (n_id * n_ood))


def evaluate(split: ScoredSplit, tpr_target: float = 0.95) -> EvalResult:
    """AUROC plus FPR at the calibrated threshold, bundled with both."""
    thr = calibrate_threshold(split.id_scores, tpr_target)
    if split.ood_scores.size == 0:
        raise EmptyInput("ood_scores is empty")
    return EvalResult(
        auroc=auroc(split),
        fpr_at_tpr=float(np.mean(split.ood_scores >= thr)),
        threshold=thr,
        tpr_target=tpr_target,
    )
