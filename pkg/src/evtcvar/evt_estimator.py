"""The EVT CVaR estimator: tail quantile and tail mean from a GPD fit.

Pipeline: automated threshold selection, GPD fit above the chosen
threshold, tail quantile from the fitted survival function anchored at the
empirical CDF of the threshold, then the closed-form GPD tail mean.  Falls
back to the naive sample-average estimate whenever the pipeline is
undefined (short samples or no surviving threshold candidate).
"""

from __future__ import annotations

from typing import Optional

from . import _kernels
from ._kernels import SA_FALLBACK_MIN
from .empirical import Sample
from .errors import DomainError, InsufficientDataError, NonIntegrableTailError
from .gpd_mle import GpdFit
from .threshold_select import DEFAULT_THRESHOLD_CONFIG, ThresholdConfig
from .types import CvarEstimate, Method

__all__ = [
    "SA_FALLBACK_MIN",
    "evt_quantile",
    "evt_cvar_from_fit",
    "estimate_evt_cvar",
]


def evt_quantile(
    u: float, xi_hat: float, sigma_hat: float, f_at_u: float, alpha: float
) -> float:
    """Tail quantile q_alpha implied by a GPD fit above threshold u.

    ``f_at_u`` is the (empirical) CDF at u and must not exceed alpha; the
    exponential branch is used for |xi_hat| below 1e-10.
    """
    if not 0.0 <= f_at_u < 1.0:
        raise DomainError(f"F(u) must lie in [0, 1), got {f_at_u}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha < f_at_u:
        raise DomainError(
            f"threshold sits above the target quantile: F(u)={f_at_u} > alpha={alpha}"
        )
    if not sigma_hat > 0.0:
        raise DomainError(f"sigma_hat must be positive, got {sigma_hat}")
    return float(_kernels.evt_quantile_core(u, xi_hat, sigma_hat, f_at_u, alpha))


def evt_cvar_from_fit(
    q_hat: float, u: float, xi_hat: float, sigma_hat: float, alpha: float
) -> float:
    """CVaR from the GPD tail mean: q + (sigma + xi*(q - u)) / (1 - xi)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if xi_hat >= 1.0:
        raise NonIntegrableTailError(
            f"CVaR undefined for fitted shape {xi_hat} >= 1"
        )
    if q_hat < u:
        raise DomainError(f"tail quantile {q_hat} lies below the threshold {u}")
    if not sigma_hat > 0.0:
        raise DomainError(f"sigma_hat must be positive, got {sigma_hat}")
    return q_hat + (sigma_hat + xi_hat * (q_hat - u)) / (1.0 - xi_hat)


def estimate_evt_cvar(
    sample: Sample,
    alpha: float,
    config: Optional[ThresholdConfig] = None,
    sa_fallback_min: int = SA_FALLBACK_MIN,
) -> CvarEstimate:
    """EVT CVaR estimate of a sample, with automatic SA fallback.

    Below ``sa_fallback_min`` observations, or when threshold selection
    fails, the returned estimate is the sample average above the naive
    quantile, tagged EVT_FALLBACK_SA.
    """
    if len(sample) == 0:
        raise InsufficientDataError("cannot estimate CVaR of an empty sample")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    cfg = config or DEFAULT_THRESHOLD_CONFIG
    (
        value,
        code,
        u,
        xi,
        sigma,
        n_exc,
        quantile,
        loglik,
        converged,
        _level,
    ) = _kernels.evt_estimate_core(
        sample.sorted_values,
        alpha,
        cfg.grid_size,
        cfg.gamma,
        _kernels.MIN_EXCESSES,
        sa_fallback_min,
    )
    if code != 0:
        return CvarEstimate(
            value=float(value),
            method=Method.EVT_FALLBACK_SA,
            alpha=alpha,
            quantile=float(quantile),
        )
    fit = GpdFit(
        xi_hat=float(xi),
        sigma_hat=float(sigma),
        n_excesses=int(n_exc),
        log_likelihood=float(loglik),
        converged=bool(converged),
    )
    return CvarEstimate(
        value=float(value),
        method=Method.EVT,
        alpha=alpha,
        quantile=float(quantile),
        threshold=float(u),
        fit=fit,
    )
