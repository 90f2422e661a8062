"""Confidence intervals for the two CVaR estimators.

Percentile bootstrap for the sample-average estimate, and a delta-method
Gaussian band for the EVT estimate built from the empirical Fisher
information of the GPD fit.  The delta band deliberately ignores the
variability of the tail quantile, so it runs narrow; see the coverage tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .empirical import Sample
from .errors import (
    CiUnavailableError,
    DomainError,
    InsufficientDataError,
    ParameterError,
)
from .gpd_mle import GpdFit
from .numerics import norm_ppf
from .distributions import RngStream

__all__ = [
    "CiMethod",
    "ConfidenceInterval",
    "bootstrap_cvar_ci",
    "gpd_loglik_derivs",
    "fisher_information",
    "evt_cvar_gradient",
    "delta_method_ci",
]

# Fitted shapes closer than this to the optimizer's 0.99 clip are treated
# as boundary solutions with no usable asymptotics.
_XI_BOUNDARY_GAP = 1e-3
# Below this |xi|*(1+z/sigma), the xi-derivatives switch to series
# expansions (the direct forms cancel catastrophically in 1/xi^3 terms).
_XI_SERIES_CUTOFF = 1e-3


class CiMethod(str, Enum):
    BOOTSTRAP = "BOOTSTRAP"
    DELTA = "DELTA"


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    method: CiMethod

    def __post_init__(self):
        if self.lo > self.hi:
            raise ParameterError(f"interval bounds out of order: [{self.lo}, {self.hi}]")

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


def bootstrap_cvar_ci(
    sample: Sample,
    alpha: float,
    level: float = 0.9,
    m: int = 1000,
    rng: RngStream | None = None,
) -> ConfidenceInterval:
    """Percentile bootstrap band for the sample CVaR.

    Draws ``m`` resamples of the full sample size with replacement,
    recomputes the naive CVaR on each, and returns the order statistics at
    ceil(m*(1-level)/2) and ceil(m*(1+level)/2).
    """
    if len(sample) == 0:
        raise InsufficientDataError("cannot bootstrap an empty sample")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    if m < 100:
        raise ParameterError(f"bootstrap needs at least 100 resamples, got {m}")
    rng = rng or RngStream(0)
    gen = rng.generator
    values = sample.sorted_values
    t = len(sample)
    kth = _kernels.ceil_index(alpha * t)
    if kth > t:
        kth = t
    estimates = np.empty(m)
    # batch the resamples to keep the index matrix in cache-friendly chunks
    chunk = max(1, min(m, int(2e7) // max(t, 1)))
    done = 0
    while done < m:
        size = min(chunk, m - done)
        idx = gen.integers(0, t, size=(size, t))
        draws = values[idx]
        part = np.partition(draws, kth - 1, axis=1)
        q = part[:, kth - 1]
        mask = part >= q[:, None]
        estimates[done : done + size] = (part * mask).sum(axis=1) / mask.sum(axis=1)
        done += size
    estimates.sort()
    lo_i = _kernels.ceil_index(m * (1.0 - level) / 2.0)
    hi_i = _kernels.ceil_index(m * (1.0 + level) / 2.0)
    lo_i = min(max(lo_i, 1), m)
    hi_i = min(max(hi_i, 1), m)
    return ConfidenceInterval(
        lo=float(estimates[lo_i - 1]),
        hi=float(estimates[hi_i - 1]),
        level=level,
        method=CiMethod.BOOTSTRAP,
    )


def _derivs_direct(xi: float, sigma: float, z: float):
    w = z / sigma
    swz = sigma + xi * z
    a = z / swz
    lg = math.log1p(xi * w)
    d_s = (z * (xi + 1.0) / swz - 1.0) / sigma
    d_x = lg / (xi * xi) - (1.0 / xi + 1.0) * a
    d_ss = -(z * (xi + 1.0) / swz - 1.0) / (sigma * sigma) - z * (xi + 1.0) / (
        sigma * swz * swz
    )
    d_sx = (a - z * z * (xi + 1.0) / (swz * swz)) / sigma
    d_xx = (
        -2.0 * lg / (xi**3)
        + 2.0 * a / (xi * xi)
        + (1.0 / xi + 1.0) * (z * z) / (swz * swz)
    )
    return d_s, d_x, d_ss, d_sx, d_xx


def _derivs_series(xi: float, sigma: float, z: float):
    # Taylor expansions in xi about 0 (w = z/sigma); second order is ample
    # inside the |xi|*(1+w) < 1e-3 switch region.
    w = z / sigma
    d_x = (-w + 0.5 * w * w) + xi * (w * w - 2.0 * w**3 / 3.0) + xi * xi * (
        0.75 * w**4 - w**3
    )
    d_xx = (w * w - 2.0 * w**3 / 3.0) + xi * (1.5 * w**4 - 2.0 * w**3) + xi * xi * (
        3.0 * w**4 - 2.4 * w**5
    )
    swz = sigma + xi * z
    d_s = (z * (xi + 1.0) / swz - 1.0) / sigma
    d_ss = -(z * (xi + 1.0) / swz - 1.0) / (sigma * sigma) - z * (xi + 1.0) / (
        sigma * swz * swz
    )
    d_sx = (z / swz - z * z * (xi + 1.0) / (swz * swz)) / sigma
    return d_s, d_x, d_ss, d_sx, d_xx


def gpd_loglik_derivs(xi: float, sigma: float, z: float):
    """First and second partials of log g_{xi,sigma}(z).

    Returns (d_sigma, d_xi, d_sigma_sigma, d_sigma_xi, d_xi_xi).  The
    xi-direction expressions use series expansions near xi = 0, where the
    closed forms lose all precision to 1/xi^3 cancellation.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if z < 0.0:
        raise DomainError(f"excess must be >= 0, got {z}")
    if 1.0 + xi * z / sigma <= 0.0:
        raise DomainError(
            f"(xi={xi}, sigma={sigma}, z={z}) lies outside the GPD support"
        )
    w = z / sigma
    if abs(xi) * (1.0 + w) < _XI_SERIES_CUTOFF:
        return _derivs_series(xi, sigma, z)
    return _derivs_direct(xi, sigma, z)


def fisher_information(xi: float, sigma: float, excesses) -> np.ndarray:
    """Empirical Fisher information over (xi, sigma): the negated mean
    Hessian of the log-likelihood across the excesses."""
    z = np.asarray(excesses, dtype=float)
    if z.size == 0:
        raise InsufficientDataError("Fisher information needs at least one excess")
    h_xx = 0.0
    h_sx = 0.0
    h_ss = 0.0
    for zi in z:
        _, _, d_ss, d_sx, d_xx = gpd_loglik_derivs(xi, sigma, float(zi))
        h_xx += d_xx
        h_sx += d_sx
        h_ss += d_ss
    n = z.size
    return -np.array([[h_xx / n, h_sx / n], [h_sx / n, h_ss / n]])


def evt_cvar_gradient(xi: float, sigma: float, u: float, q_hat: float) -> np.ndarray:
    """Gradient in (xi, sigma) of the tail-mean map
    h(xi, sigma) = q + (sigma + xi (q - u)) / (1 - xi), with q held fixed."""
    return np.array([(q_hat - u + sigma) / (1.0 - xi) ** 2, 1.0 / (1.0 - xi)])


def delta_method_ci(
    fit: GpdFit,
    u: float,
    q_hat: float,
    excesses,
    level: float = 0.9,
) -> ConfidenceInterval:
    """Delta-method Gaussian band around the EVT CVaR estimate.

    Var ~ grad_h' I^{-1} grad_h / N_u with I the empirical information at
    the fit and grad_h the gradient of the tail-mean map in (xi, sigma);
    the variability of q_hat itself is disregarded.  Raises
    CiUnavailableError on boundary fits or non-positive-definite
    information; the point estimate remains valid in that case.
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    xi, sigma = fit.xi_hat, fit.sigma_hat
    if xi > _kernels.XI_FIT_MAX - _XI_BOUNDARY_GAP:
        raise CiUnavailableError(
            f"fit sits at the shape constraint (xi_hat={xi}); no asymptotics"
        )
    z = np.asarray(excesses, dtype=float)
    n_u = z.size
    if n_u == 0:
        raise InsufficientDataError("delta method needs the excess sample")
    info = fisher_information(xi, sigma, z)
    det = info[0, 0] * info[1, 1] - info[0, 1] * info[1, 0]
    if not (info[0, 0] > 0.0 and det > 0.0):
        raise CiUnavailableError(
            "information matrix is not positive definite; CI unavailable"
        )
    grad = evt_cvar_gradient(xi, sigma, u, q_hat)
    inv = np.array([[info[1, 1], -info[0, 1]], [-info[1, 0], info[0, 0]]]) / det
    var = float(grad @ inv @ grad) / n_u
    if not var >= 0.0 or not math.isfinite(var):
        raise CiUnavailableError(f"degenerate variance estimate: {var}")
    center = q_hat + (sigma + xi * (q_hat - u)) / (1.0 - xi)
    half = float(norm_ppf((1.0 + level) / 2.0)) * math.sqrt(var)
    return ConfidenceInterval(
        lo=center - half, hi=center + half, level=level, method=CiMethod.DELTA
    )
