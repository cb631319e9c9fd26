"""Gaussian model of detector score distributions and its closed-form FPR.

ID and OOD scores are each modeled as a Gaussian; under that model the
false-positive rate at a TPR-calibrated threshold has a closed form in the
four parameters.  Averaging over corrupted views shifts the parameters
(means drop a little, the ID variance contracts more than the OOD
variance), and the closed form makes the resulting FPR change checkable
without sampling.

Two FPR forms are provided and never silently substituted for each other:

* ``analytic_fpr_paper``: Phi((mu_id + sigma_id*PhiInv(lam) - mu_ood)/sigma_ood),
  the CDF-quantile composition written with lam read as a lower-tail
  quantile level.
* ``analytic_fpr_highscore``: the same composition under the convention
  used everywhere else in this package (higher score = ID, threshold at
  the (1-tpr) ID quantile).  This is the form that matches empirical
  fpr_at_tpr on sampled scores, and the one the simulator uses.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy.special import erfc

from .errors import NonPositiveSigma, OutOfDomain
from .metrics import ScoredSplit
from .rng import stream

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclasses.dataclass(frozen=True)
class GMMParams:
    mu_id: float
    sigma_id: float
    mu_ood: float
    sigma_ood: float

    def __post_init__(self) -> None:
        if not self.sigma_id > 0:
            raise NonPositiveSigma(f"sigma_id must be positive, got {self.sigma_id}")
        if not self.sigma_ood > 0:
            raise NonPositiveSigma(f"sigma_ood must be positive, got {self.sigma_ood}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class ParamDelta:
    d_mu_id: float = 0.0
    d_mu_ood: float = 0.0
    d_sigma_id: float = 0.0
    d_sigma_ood: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def gaussian_cdf(z):
    """Standard normal CDF, elementwise; absolute error below 1e-9."""
    out = 0.5 * erfc(-np.asarray(z, dtype=np.float64) / _SQRT2)
    return float(out) if np.isscalar(z) or np.ndim(z) == 0 else out


# Rational-approximation coefficients for the normal quantile (relative
# error ~1e-9 before polishing), split at the 0.02425 tails.
_A = (
    -3.969683028665376e01,
    2.209460984245205e02,
    -2.759285104469687e02,
    1.383577518672690e02,
    -3.066479806614716e01,
    2.506628277459239e00,
)
_B = (
    -5.447609879822406e01,
    1.615858368580409e02,
    -1.556989798598866e02,
    6.680131188771972e01,
    -1.328068155288572e01,
)
_C = (
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e00,
    -2.549732539343734e00,
    4.374664141464968e00,
    2.938163982698783e00,
)
_D = (
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e00,
    3.754408661907416e00,
)
_P_LOW = 0.02425


def _tail_estimate(q: np.ndarray) -> np.ndarray:
    num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
    den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
    return num / den


def _quantile_array(p: np.ndarray) -> np.ndarray:
    """Vectorized normal quantile: rational initializer + 2 Newton steps."""
    x = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)
    if lo.any():
        q = np.sqrt(-2.0 * np.log(p[lo]))
        x[lo] = _tail_estimate(q)
    if hi.any():
        q = np.sqrt(-2.0 * np.log1p(-p[hi]))
        x[hi] = -_tail_estimate(q)
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num * q / den
    for _ in range(2):
        pdf = np.exp(-0.5 * x * x) / _SQRT_2PI
        err = 0.5 * erfc(-x / _SQRT2) - p
        # Where the density underflows the estimate is already past any
        # representable refinement; leave it alone.
        x = x - np.where(pdf > 0.0, err / np.where(pdf > 0.0, pdf, 1.0), 0.0)
    return x


def gaussian_quantile(p: float) -> float:
    """Inverse of gaussian_cdf on (0, 1); round trips within 1e-9."""
    if not 0.0 < p < 1.0:
        raise OutOfDomain(f"quantile needs 0 < p < 1, got {p}")
    return float(_quantile_array(np.array([p], dtype=np.float64))[0])


def portable_normal(gen: np.random.Generator, n: int) -> np.ndarray:
    """Standard normal draws by inverse CDF over the generator's uniforms.

    Ties the draw to the documented quantile instead of the generator's
    internal normal algorithm, so sequences reproduce anywhere the uniform
    stream does.
    """
    u = np.maximum(gen.random(n), np.finfo(np.float64).tiny)
    return _quantile_array(u)


def analytic_fpr_paper(params: GMMParams, lam: float) -> float:
    """The quantile-composition FPR formula, evaluated verbatim.

    Reads lam as a lower-tail ID quantile level.  Under this package's
    higher-score-is-ID convention the empirically matching quantity is
    analytic_fpr_highscore; keep the two apart.
    """
    if not 0.0 < lam < 1.0:
        raise OutOfDomain(f"lam must be in (0,1), got {lam}")
    z = (params.mu_id + params.sigma_id * gaussian_quantile(lam) - params.mu_ood) / params.sigma_ood
    return gaussian_cdf(z)


def analytic_fpr_highscore(params: GMMParams, tpr: float) -> float:
    """FPR at the threshold admitting the top tpr fraction of ID scores.

    threshold = mu_id + sigma_id * PhiInv(1 - tpr); the returned value is
    P(OOD >= threshold) = 1 - Phi((threshold - mu_ood)/sigma_ood), which
    matches empirical fpr_at_tpr on Gaussian samples.
    """
    if not 0.0 < tpr < 1.0:
        raise OutOfDomain(f"tpr must be in (0,1), got {tpr}")
    z = (
        params.mu_id + params.sigma_id * gaussian_quantile(1.0 - tpr) - params.mu_ood
    ) / params.sigma_ood
    return 1.0 - gaussian_cdf(z)


def sample_gmm(params: GMMParams, n_id: int, n_ood: int, seed: int = 0) -> ScoredSplit:
    """Seeded Gaussian score samples for both splits.

    Draws go through the portable counter-based uniform stream and the
    package's own quantile, so sequences are identical across platforms.
    The two splits use independent streams: changing n_id never shifts the
    OOD draws.
    """
    if n_id < 1 or n_ood < 1:
        raise ValueError("need at least one sample per split")

    def draws(tag: str, n: int, mu: float, sigma: float) -> np.ndarray:
        return mu + sigma * portable_normal(stream(seed, "gmm", tag), n)

    return ScoredSplit(
        id_scores=draws("id", n_id, params.mu_id, params.sigma_id),
        ood_scores=draws("ood", n_ood, params.mu_ood, params.sigma_ood),
    )


def fit_gmm_moments(split: ScoredSplit) -> GMMParams:
    """Moment-matching fit of the four parameters from scored samples."""
    if split.id_scores.size < 2 or split.ood_scores.size < 2:
        raise ValueError("need at least two scores per split to fit moments")
    return GMMParams(
        mu_id=float(split.id_scores.mean()),
        sigma_id=float(split.id_scores.std()),
        mu_ood=float(split.ood_scores.mean()),
        sigma_ood=float(split.ood_scores.std()),
    )


def assumption_violations(delta: ParamDelta) -> tuple:
    """Which of the corruption-shift assumptions the delta breaks.

    The model expects corruption to move the ID side harder than the OOD
    side on both moments: |d_mu_id| > |d_mu_ood| and |d_sigma_id| >
    |d_sigma_ood|.  Returns human-readable violation strings, empty when
    the delta conforms.
    """
    out = []
    if not abs(delta.d_mu_id) > abs(delta.d_mu_ood):
        out.append(f"|d_mu_id|={abs(delta.d_mu_id)} not > |d_mu_ood|={abs(delta.d_mu_ood)}")
    if not abs(delta.d_sigma_id) > abs(delta.d_sigma_ood):
        out.append(
            f"|d_sigma_id|={abs(delta.d_sigma_id)} not > |d_sigma_ood|={abs(delta.d_sigma_ood)}"
        )
    return tuple(out)


def apply_cover_delta(
    params: GMMParams, delta: ParamDelta, validate_assumptions: bool = False
) -> GMMParams:
    """Component-wise parameter shift; sigmas must stay positive.

    With validate_assumptions, deviations from the expected shift pattern
    are warned about but still applied; the caller asked for arithmetic,
    not a veto.
    """
    if validate_assumptions:
        for msg in assumption_violations(delta):
            warnings.warn(f"delta violates shift assumption: {msg}", stacklevel=2)
    new_sigma_id = params.sigma_id + delta.d_sigma_id
    new_sigma_ood = params.sigma_ood + delta.d_sigma_ood
    if new_sigma_id <= 0:
        raise NonPositiveSigma(f"delta drives sigma_id to {new_sigma_id}")
    if new_sigma_ood <= 0:
        raise NonPositiveSigma(f"delta drives sigma_ood to {new_sigma_ood}")
    return GMMParams(
        mu_id=params.mu_id + delta.d_mu_id,
        sigma_id=new_sigma_id,
        mu_ood=params.mu_ood + delta.d_mu_ood,
        sigma_ood=new_sigma_ood,
    )


class LemmaResult(NamedTuple):
    fpr_before: float
    fpr_after: float
    declined: bool


def verify_lemma(params: GMMParams, delta: ParamDelta, tpr: float = 0.95) -> LemmaResult:
    """Does the parameter shift lower the analytic FPR at this TPR?

    Pure and deterministic: both sides use analytic_fpr_highscore, the
    convention-consistent form.  declined is a strict comparison, so a
    zero delta reports False.
    """
    before = analytic_fpr_highscore(params, tpr)
    after = analytic_fpr_highscore(apply_cover_delta(params, delta), tpr)
    return LemmaResult(fpr_before=before, fpr_after=after, declined=after < before)
