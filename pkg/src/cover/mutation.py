"""Confidence-mutation diagnostics and the frequency split.

Corrupting an input moves its confidence; the drop (original minus
corrupted) behaves differently for ID and OOD samples that start at similar
confidence, and that asymmetry is what averaging over views exploits.
This module measures the drop, compares it across splits inside a matched
confidence band, partitions samples into confident/unconfident groups per
split, and decomposes images into low/high frequency parts whose
classifier divergence can be correlated with the drop.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import EmptyBand, NonFinite
from .image import validate_image
from .scoring import log_softmax


@dataclasses.dataclass(frozen=True)
class MutationRecord:
    """Original and corrupted confidence for one sample.

    mu is derived, never stored, so it cannot drift from the two scores.
    """

    sample_id: str
    original_score: float
    corrupted_score: float
    split: str  # "id" or "ood"

    def __post_init__(self) -> None:
        if self.split not in ("id", "ood"):
            raise ValueError(f"split must be 'id' or 'ood', got {self.split!r}")

    @property
    def mu(self) -> float:
        return self.original_score - self.corrupted_score


@dataclasses.dataclass(frozen=True)
class GroupPartition:
    confident_id: tuple
    unconfident_id: tuple
    overconfident_ood: tuple
    unconfident_ood: tuple
    cut_id: float
    cut_ood: float


@dataclasses.dataclass(frozen=True)
class FrequencySplit:
    """Low-pass image, signed high-pass residual, and their spectral energies.

    low + high reconstructs the input exactly; the energies are taken
    before the low part is clipped for viewing, so low_energy + high_energy
    equals spectrum_energy up to rounding.
    """

    low: np.ndarray
    high: np.ndarray
    radius_fraction: float
    low_energy: float
    high_energy: float
    spectrum_energy: float


def confidence_difference(original: float, corrupted: float) -> float:
    """Drop in confidence under corruption; negative when corruption helps."""
    return original - corrupted


def mutation_gap(records, band_eps: float = 0.01) -> tuple:
    """Mean drop per split, restricted to confidence-matched samples.

    A record is kept when some record of the other split starts within
    band_eps of its original score; comparing means over unmatched
    populations would conflate the drop asymmetry with the base confidence
    gap.  Returns (mean_mu_id, mean_mu_ood).  The expected finding is
    mean_mu_id < mean_mu_ood, but that is the caller's claim to check.
    """
    if band_eps < 0:
        raise ValueError(f"band_eps must be non-negative, got {band_eps}")
    ids = [r for r in records if r.split == "id"]
    oods = [r for r in records if r.split == "ood"]
    id_orig = np.array([r.original_score for r in ids])
    ood_orig = np.array([r.original_score for r in oods])

    def matched(side: list, own: np.ndarray, other: np.ndarray) -> list:
        if other.size == 0:
            return []
        other_sorted = np.sort(other)
        lo = np.searchsorted(other_sorted, own - band_eps, side="left")
        hi = np.searchsorted(other_sorted, own + band_eps, side="right")
        return [r for r, l, h in zip(side, lo, hi) if h > l]

    kept_id = matched(ids, id_orig, ood_orig)
    kept_ood = matched(oods, ood_orig, id_orig)
    if not kept_id or not kept_ood:
        raise EmptyBand(f"no confidence matches within band_eps={band_eps}")
    mean_id = float(np.mean([r.mu for r in kept_id]))
    mean_ood = float(np.mean([r.mu for r in kept_ood]))
    return mean_id, mean_ood


def partition_groups(records, cut_id: float = None, cut_ood: float = None) -> GroupPartition:
    """Split records into four groups by split and original confidence.

    Cuts default to the per-split median, which keeps groups roughly
    balanced; a score exactly at the cut lands in the confident group.
    """
    recs = list(records)
    ids = [r for r in recs if r.split == "id"]
    oods = [r for r in recs if r.split == "ood"]
    if cut_id is None:
        cut_id = float(np.median([r.original_score for r in ids])) if ids else 0.0
    if cut_ood is None:
        cut_ood = float(np.median([r.original_score for r in oods])) if oods else 0.0
    if not (np.isfinite(cut_id) and np.isfinite(cut_ood)):
        raise NonFinite("cut points must be finite")
    return GroupPartition(
        confident_id=tuple(r for r in ids if r.original_score >= cut_id),
        unconfident_id=tuple(r for r in ids if r.original_score < cut_id),
        overconfident_ood=tuple(r for r in oods if r.original_score >= cut_ood),
        unconfident_ood=tuple(r for r in oods if r.original_score < cut_ood),
        cut_id=cut_id,
        cut_ood=cut_ood,
    )


def frequency_split(img: np.ndarray, radius_fraction: float = 0.6) -> FrequencySplit:
    """Split an image into low and high frequency parts with a circular mask.

    Per channel: 2-D DFT, keep coefficients within radius_fraction of the
    half-min-side in the centered spectrum, inverse transform.  The low
    part is clipped to [0, 1] for use as an image; the high part is the
    signed remainder, so low + high gives back the input exactly.  Works
    for any H and W; nothing requires power-of-two sides.
    """
    arr = validate_image(img)
    if not 0.0 < radius_fraction <= 1.0:
        raise ValueError(f"radius_fraction must be in (0,1], got {radius_fraction}")
    h, w = arr.shape[:2]
    fy = np.arange(h) - h // 2
    fx = np.arange(w) - w // 2
    dist = np.hypot(fy[:, None], fx[None, :])
    mask = dist <= radius_fraction * (min(h, w) / 2.0)

    low = np.empty_like(arr)
    low_energy = 0.0
    high_energy = 0.0
    spectrum_energy = 0.0
    for c in range(3):
        spec = np.fft.fftshift(np.fft.fft2(arr[:, :, c]))
        kept = spec * mask
        spectrum_energy += float(np.sum(np.abs(spec) ** 2))
        low_energy += float(np.sum(np.abs(kept) ** 2))
        high_energy += float(np.sum(np.abs(spec * ~mask) ** 2))
        back = np.fft.ifft2(np.fft.ifftshift(kept))
        residue = float(np.max(np.abs(back.imag)))
        if residue > 1e-9:
            raise AssertionError(f"imaginary residue {residue} exceeds 1e-9; mask not symmetric?")
        low[:, :, c] = back.real
    low = np.clip(low, 0.0, 1.0)
    return FrequencySplit(
        low=low,
        high=arr - low,
        radius_fraction=radius_fraction,
        low_energy=low_energy,
        high_energy=high_energy,
        spectrum_energy=spectrum_energy,
    )


def kl_softmax(p_logits, q_logits, tau: float = 1.0) -> float:
    """KL(softmax(p/tau) || softmax(q/tau)), computed in log space."""
    log_p = log_softmax(p_logits, tau)
    log_q = log_softmax(q_logits, tau)
    if log_p.shape != log_q.shape:
        raise ValueError(f"logit lengths differ: {log_p.size} vs {log_q.size}")
    kl = float(np.sum(np.exp(log_p) * (log_p - log_q)))
    # Exact-zero for identical inputs; rounding can otherwise produce -1e-17.
    return max(kl, 0.0)


def pearson_correlation(xs, ys) -> float:
    """Sample Pearson correlation; nan when either side has zero variance.

    Used to report how the confidence drop tracks the low/high-frequency
    prediction divergence over a sample set.  It is a reported statistic,
    not an invariant: callers should surface it, not assert its sign.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-D and the same length")
    if x.size < 2:
        raise ValueError("need at least two points")
    xd = x - x.mean()
    yd = y - y.mean()
    denom = np.sqrt(np.sum(xd**2) * np.sum(yd**2))
    if denom == 0.0:
        return float("nan")
    return float(np.sum(xd * yd) / denom)
