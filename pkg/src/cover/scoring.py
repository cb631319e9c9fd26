"""Confidence scores over class logits, and their average across views.

The detector's score for an input is the arithmetic mean of a base
confidence score (max softmax probability, energy, or max logit) taken over
the original input and each of its corrupted views.  With a single view the
mean degenerates to the base score exactly.  Two fusion variants pair the
original input's positive logits with negative-label or "no"-prompt logits
taken on each view.

All exponential-family computations subtract the running max before
exponentiation so that ports to other languages can agree to 1e-12.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .corruptions import ORIGINAL
from .errors import (
    MissingDimension,
    MissingNegatives,
    NegativeLengthMismatch,
    NonFinite,
    ZeroNorm,
)

BASE_KINDS = ("msp", "energy", "max_logit")
FUSION_KINDS = ("neglabel_sum_softmax", "clipn_atd")
SCORE_KINDS = BASE_KINDS + FUSION_KINDS


def _values(logits) -> np.ndarray:
    """Coerce a LogitVector or plain sequence to a finite 1-D float array."""
    if isinstance(logits, LogitVector):
        return np.asarray(logits.values, dtype=np.float64)
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"logits must be a non-empty 1-D sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("logits contain non-finite values")
    return arr


@dataclasses.dataclass(frozen=True)
class LogitVector:
    """Class-wise logits for one input: raw outputs or cosine similarities."""

    values: tuple

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 1:
            raise ValueError("LogitVector needs at least one class")
        if not all(math.isfinite(v) for v in vals):
            raise NonFinite("LogitVector values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def k(self) -> int:
        return len(self.values)


@dataclasses.dataclass(frozen=True)
class ScoreConfig:
    """Which base score to compute and at what temperatures.

    tau is the softmax temperature shared by msp and both fusions; T is the
    energy temperature; M is the expected negative-label count (0 means
    "whatever the data carries").
    """

    kind: str = "msp"
    tau: float = 1.0
    T: float = 1.0
    M: int = 0

    def __post_init__(self) -> None:
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}; expected one of {SCORE_KINDS}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.M < 0:
            raise ValueError(f"M must be non-negative, got {self.M}")


@dataclasses.dataclass(frozen=True)
class DimensionalLogits:
    """Per-view logits for one sample, keyed by dimension tag.

    per_dim holds (tag, logits) pairs in dimension order.  For the fusion
    scores, per_dim_negative holds the negative (or "no"-prompt) logits
    observed on each view.
    """

    per_dim: tuple
    per_dim_negative: tuple = None

    def __post_init__(self) -> None:
        if not self.per_dim:
            raise ValueError("per_dim must be non-empty")
        ks = {len(_values(lv)) for _, lv in self.per_dim}
        if len(ks) > 1:
            raise ValueError(f"all dimensions must share K, got {sorted(ks)}")

    def tags(self) -> list:
        return [tag for tag, _ in self.per_dim]


def softmax(logits, tau: float = 1.0) -> np.ndarray:
    """Stable softmax of logits/tau; sums to 1 within 1e-12."""
    vals = _values(logits) / tau
    vals = vals - vals.max()
    e = np.exp(vals)
    return e / e.sum()


def log_softmax(logits, tau: float = 1.0) -> np.ndarray:
    vals = _values(logits) / tau
    shifted = vals - vals.max()
    return shifted - np.log(np.exp(shifted).sum())


def msp_score(logits, tau: float = 1.0) -> float:
    """Maximum softmax probability, in (0, 1]."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return float(softmax(logits, tau).max())


def energy_score(logits, T: float = 1.0) -> float:
    """T * log sum exp(s/T); higher means more in-distribution."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    vals = _values(logits) / T
    m = vals.max()
    return float(T * (m + np.log(np.exp(vals - m).sum())))


def max_logit_score(logits) -> float:
    return float(_values(logits).max())


def cosine_logits(feature, class_embeddings) -> LogitVector:
    """Cosine similarity of a feature against each class embedding.

    Every value lands in [-1, 1].  Raises ZeroNorm when the feature or any
    embedding has zero length.
    """
    h = np.asarray(feature, dtype=np.float64)
    hn = np.linalg.norm(h)
    if hn == 0.0:
        raise ZeroNorm("feature vector has zero norm")
    out = []
    for j, e in enumerate(class_embeddings):
        ev = np.asarray(e, dtype=np.float64)
        if ev.shape != h.shape:
            raise ValueError(f"embedding {j} has shape {ev.shape}, feature has {h.shape}")
        en = np.linalg.norm(ev)
        if en == 0.0:
            raise ZeroNorm(f"class embedding {j} has zero norm")
        out.append(float(np.dot(h, ev) / (hn * en)))
    if not out:
        raise ValueError("need at least one class embedding")
    return LogitVector(values=tuple(out))


def base_score(logits, cfg: ScoreConfig) -> float:
    """The per-view score selected by cfg.kind (base kinds only)."""
    if cfg.kind == "msp":
        return msp_score(logits, cfg.tau)
    if cfg.kind == "energy":
        return energy_score(logits, cfg.T)
    if cfg.kind == "max_logit":
        return max_logit_score(logits)
    raise ValueError(f"{cfg.kind!r} is a fusion score; it needs negative logits")


def cover_score(dl: DimensionalLogits, cfg: ScoreConfig) -> float:
    """Mean of the selected score over the sample's views.

    Base kinds average the per-view base score; fusion kinds route to their
    dedicated pairing.  A single original view returns the base score
    unchanged.
    """
    if cfg.kind == "neglabel_sum_softmax":
        return neglabel_cover_score(dl, cfg)
    if cfg.kind == "clipn_atd":
        return clipn_cover_score(dl, cfg)
    scores = [base_score(lv, cfg) for _, lv in dl.per_dim]
    return float(sum(scores) / len(scores))


def _original_values(dl: DimensionalLogits) -> np.ndarray:
    for tag, lv in dl.per_dim:
        if tag == ORIGINAL:
            return _values(lv)
    raise MissingDimension("fusion scores need the original dimension's positive logits")


def neglabel_cover_score(dl: DimensionalLogits, cfg: ScoreConfig) -> float:
    """Sum-softmax negative-label fusion averaged over views, in (0, 1).

    Per view: sum_i e^{s_i/tau} / (sum_i e^{s_i/tau} + sum_j e^{neg_j/tau}),
    positives fixed to the original view's logits, negatives taken from the
    view itself.  Positive and negative logits share one max subtraction.
    """
    if not dl.per_dim_negative:
        raise MissingNegatives("neglabel fusion needs per-dimension negative logits")
    pos = _original_values(dl) / cfg.tau
    vals = []
    for tag, neg_lv in dl.per_dim_negative:
        neg = _values(neg_lv) / cfg.tau
        if cfg.M and neg.size != cfg.M:
            raise NegativeLengthMismatch(
                f"dimension {tag!r} carries {neg.size} negatives, config says {cfg.M}"
            )
        m = max(pos.max(), neg.max())
        pe = np.exp(pos - m).sum()
        ne = np.exp(neg - m).sum()
        vals.append(pe / (pe + ne))
    return float(sum(vals) / len(vals))


def clipn_cover_score(dl: DimensionalLogits, cfg: ScoreConfig) -> float:
    """"No"-prompt agreement fusion averaged over views, in [0, 1].

    Per view: sum_j p_no(j) * softmax(s/tau)_j, where p_no(j) pits the
    view's "no" logit against the original view's class logit pairwise.
    """
    if not dl.per_dim_negative:
        raise MissingNegatives("clipn fusion needs per-dimension 'no' logits")
    pos = _original_values(dl) / cfg.tau
    p_cls = softmax(pos, 1.0)
    vals = []
    for tag, neg_lv in dl.per_dim_negative:
        neg = _values(neg_lv) / cfg.tau
        if neg.size != pos.size:
            raise NegativeLengthMismatch(
                f"dimension {tag!r} carries {neg.size} 'no' logits for {pos.size} classes"
            )
        # p_no = e^neg / (e^pos + e^neg), computed as a stable sigmoid.
        diff = neg - pos
        p_no = np.empty_like(diff)
        up = diff >= 0
        p_no[up] = 1.0 / (1.0 + np.exp(-diff[up]))
        low = np.exp(diff[~up])
        p_no[~up] = low / (1.0 + low)
        vals.append(float(np.dot(p_no, p_cls)))
    return float(sum(vals) / len(vals))
