"""Constrained maximum-likelihood estimation of GPD parameters.

The fit maximizes the GPD log-likelihood of threshold excesses over
(xi, log sigma) with a derivative-free simplex search, under the
integrability constraint xi < 1 (hard clip at 0.99, enforced through an
infeasibility sentinel) and support feasibility for xi < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import MIN_EXCESSES
from .errors import InsufficientDataError, ParameterError

__all__ = ["GpdFit", "MIN_EXCESSES", "fit_gpd", "gpd_loglik"]


@dataclass(frozen=True)
class GpdFit:
    """Fitted GPD parameters for a set of threshold excesses."""

    xi_hat: float
    sigma_hat: float
    n_excesses: int
    log_likelihood: float
    converged: bool


def gpd_loglik(xi: float, sigma: float, excesses) -> float:
    """Sum of log GPD densities; -inf sentinel on any infeasible point.

    Never raises for infeasible (xi, sigma), so optimizers can probe freely.
    """
    z = np.ascontiguousarray(excesses, dtype=float)
    if not sigma > 0.0 or not math.isfinite(sigma):
        return -math.inf
    nll = _kernels.gpd_nll(float(xi), math.log(sigma), z)
    return -float(nll)


def fit_gpd(excesses) -> GpdFit:
    """Maximum-likelihood GPD fit of nonnegative threshold excesses.

    Raises InsufficientDataError below MIN_EXCESSES observations.  Optimizer
    failure is reported through ``converged=False`` rather than an
    exception; callers treat such fits as discarded candidates.
    """
    z = np.ascontiguousarray(excesses, dtype=float)
    if z.ndim != 1:
        raise ParameterError("excesses must be a one-dimensional sequence")
    if z.shape[0] < MIN_EXCESSES:
        raise InsufficientDataError(
            f"need at least {MIN_EXCESSES} excesses to fit a GPD, got {z.shape[0]}"
        )
    if np.any(z < 0.0) or not np.all(np.isfinite(z)):
        raise ParameterError("excesses must be finite and >= 0")
    xi, sigma, loglik, converged = _kernels.fit_gpd_core(z)
    return GpdFit(
        xi_hat=float(xi),
        sigma_hat=float(sigma),
        n_excesses=int(z.shape[0]),
        log_likelihood=float(loglik),
        converged=bool(converged),
    )
