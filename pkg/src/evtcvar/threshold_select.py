"""Automated threshold selection for peaks-over-threshold tail fits.

Implements ordered goodness-of-fit testing over a grid of candidate
thresholds in the spirit of Bader, Yan & Zhang (2018): each candidate is an
empirical quantile between the 0.7 level and the target level; excesses
above each candidate get a GPD fit and an Anderson-Darling statistic whose
p-value comes from the Choulakian-Stephens critical-value table; the
ForwardStop rule of G'Sell et al. (2016) turns the ordered p-values into a
threshold choice.  Candidates with too few excesses, failed fits, or fitted
shape above 0.9 are discarded before the ordered test sequence is formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from ._kernels import GRID_LEVEL_LO, MIN_EXCESSES, XI_DISCARD
from ._tables import AD_TABLE_CRITICAL, AD_TABLE_LEVELS, AD_TABLE_XI
from .empirical import Sample
from .errors import (
    DomainError,
    InsufficientDataError,
    ParameterError,
    SelectionFailureError,
)
from .gpd_mle import GpdFit

__all__ = [
    "ThresholdCandidate",
    "ThresholdSelection",
    "ThresholdConfig",
    "candidate_grid",
    "ad_statistic",
    "ad_pvalue",
    "forward_stop",
    "select_threshold",
    "AD_TABLE_XI",
    "AD_TABLE_LEVELS",
    "AD_TABLE_CRITICAL",
]

_DISCARD_REASONS = {
    0: None,
    1: "insufficient_excesses",
    2: "fit_failed",
    3: "xi_above_cap",
}


@dataclass(frozen=True)
class ThresholdConfig:
    """Grid size and ForwardStop significance for threshold selection."""

    grid_size: int = 50
    gamma: float = 0.1

    def __post_init__(self):
        if self.grid_size < 2:
            raise ParameterError(f"grid_size must be >= 2, got {self.grid_size}")
        if not self.gamma > 0.0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")


DEFAULT_THRESHOLD_CONFIG = ThresholdConfig()


@dataclass(frozen=True)
class ThresholdCandidate:
    u: float
    quantile_level: float
    n_excesses: int
    fit: Optional[GpdFit]
    ad_stat: Optional[float]
    p_value: Optional[float]
    discarded: bool
    discard_reason: Optional[str]


@dataclass(frozen=True)
class ThresholdSelection:
    """Outcome of the ordered testing procedure.

    ``chosen_index`` is the 1-based position of the chosen threshold in the
    surviving test sequence: k_hat + 1 when the ForwardStop cutoff exists
    and is interior, 1 when it does not exist, and the last survivor
    (flagged ``low_confidence``) when every ordered test is rejected.
    """

    candidates: tuple
    k_hat: Optional[int]
    chosen_index: int
    chosen: ThresholdCandidate
    n_survivors: int
    low_confidence: bool


def _validate_alpha(alpha: float) -> None:
    if not GRID_LEVEL_LO < alpha < 1.0:
        raise DomainError(
            f"alpha must lie in ({GRID_LEVEL_LO}, 1) for threshold selection, got {alpha}"
        )


def candidate_grid(sample: Sample, alpha: float, grid_size: int = 50) -> np.ndarray:
    """Ascending candidate thresholds at equally spaced quantile levels.

    Levels run from 0.7 up to alpha inclusive; duplicate thresholds caused
    by ties collapse to their first occurrence.  Requires the lowest
    candidate to leave at least MIN_EXCESSES strict exceedances.
    """
    _validate_alpha(alpha)
    if grid_size < 2:
        raise ParameterError(f"grid_size must be >= 2, got {grid_size}")
    t = len(sample)
    if t == 0:
        raise InsufficientDataError("cannot build a threshold grid on an empty sample")
    ys = sample.sorted_values
    idx = _kernels.ceil_index(GRID_LEVEL_LO * t)
    u1 = ys[min(idx, t) - 1]
    n_above = t - int(np.searchsorted(ys, u1, side="right"))
    if n_above < MIN_EXCESSES:
        raise InsufficientDataError(
            f"sample of {t} leaves only {n_above} excesses above the "
            f"{GRID_LEVEL_LO} quantile; need {MIN_EXCESSES}"
        )
    levels, us, *_ = _kernels.threshold_scan_core(ys, alpha, grid_size, MIN_EXCESSES)
    return np.asarray(us)


def ad_statistic(excesses, fit: GpdFit) -> float:
    """Anderson-Darling A^2 of excesses against the fitted GPD.

    Transformed CDF values are clamped into [1e-12, 1 - 1e-12] before the
    logs, so degenerate fits yield a large finite statistic instead of inf.
    """
    z = np.ascontiguousarray(excesses, dtype=float)
    if z.shape[0] < 1:
        raise InsufficientDataError("AD statistic needs at least one excess")
    if np.any(np.diff(z) < 0.0):
        z = np.sort(z)
    return float(_kernels.ad_statistic_core(z, fit.xi_hat, fit.sigma_hat))


def ad_pvalue(ad_stat: float, xi_hat: float) -> float:
    """Upper-tail p-value for A^2 at shape xi_hat, clamped to [0.001, 0.999]."""
    return float(_kernels.ad_pvalue_core(float(ad_stat), float(xi_hat)))


def forward_stop(p_values: Sequence[float], gamma: float) -> Optional[int]:
    """Largest k whose running mean of -log(1-p_i) stays within gamma.

    Returns None when no k qualifies; p-values are clamped into
    [0.001, 0.999] before the logs.
    """
    if not gamma > 0.0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    p = np.ascontiguousarray(p_values, dtype=float)
    if p.shape[0] == 0:
        return None
    k = int(_kernels.forward_stop_core(p, gamma))
    return k if k > 0 else None


def select_threshold(
    sample: Sample,
    alpha: float,
    grid_size: int = 50,
    gamma: float = 0.1,
) -> ThresholdSelection:
    """Run the full automated threshold-selection procedure on a sample.

    Deterministic given the sample.  Raises SelectionFailureError when no
    candidate survives the discard rules (callers fall back to the naive
    sample estimate).
    """
    # grid preconditions (raises InsufficientDataError on tiny samples)
    candidate_grid(sample, alpha, grid_size)
    if not gamma > 0.0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    ys = sample.sorted_values
    (
        levels,
        us,
        nexc,
        xi,
        sg,
        ll,
        conv,
        ad,
        pv,
        disc,
        k_hat,
        chosen_idx,
        chosen_pos,
        n_surv,
        low_conf,
    ) = _kernels.select_threshold_core(ys, alpha, grid_size, gamma, MIN_EXCESSES)

    candidates = []
    for c in range(us.shape[0]):
        has_fit = disc[c] != 1
        fit = (
            GpdFit(
                xi_hat=float(xi[c]),
                sigma_hat=float(sg[c]),
                n_excesses=int(nexc[c]),
                log_likelihood=float(ll[c]),
                converged=bool(conv[c]),
            )
            if has_fit
            else None
        )
        tested = disc[c] == 0
        candidates.append(
            ThresholdCandidate(
                u=float(us[c]),
                quantile_level=float(levels[c]),
                n_excesses=int(nexc[c]),
                fit=fit,
                ad_stat=float(ad[c]) if tested else None,
                p_value=float(pv[c]) if tested else None,
                discarded=bool(disc[c] != 0),
                discard_reason=_DISCARD_REASONS[int(disc[c])],
            )
        )
    if chosen_idx < 0:
        raise SelectionFailureError(
            "every candidate threshold was discarded "
            f"(grid of {us.shape[0]} candidates, sample size {len(sample)})"
        )
    return ThresholdSelection(
        candidates=tuple(candidates),
        k_hat=int(k_hat) if k_hat > 0 else None,
        chosen_index=int(chosen_pos),
        chosen=candidates[int(chosen_idx)],
        n_survivors=int(n_surv),
        low_confidence=bool(low_conf),
    )


XI_DISCARD_CAP = XI_DISCARD
