"""Distribution-free estimators: empirical CDF, naive quantile, sample CVaR."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from . import _kernels
from .errors import DomainError, InsufficientDataError
from .types import CvarEstimate, Method

__all__ = ["Sample", "empirical_cdf", "naive_quantile", "sample_cvar"]


class Sample:
    """An observed cost sample with an insertion-sorted companion buffer.

    Appends are O(log t) to locate plus O(t) to shift, which is the right
    trade for the bandit loop (one observation per pull at horizon 5000).
    Single writer; concurrent readers are safe between mutations.
    """

    __slots__ = ("_values", "_sorted", "_n")

    def __init__(self, values: Iterable[float] = ()):
        self._values = [float(v) for v in values]
        self._n = len(self._values)
        cap = max(16, self._n)
        self._sorted = np.empty(cap)
        if self._n:
            self._sorted[: self._n] = np.sort(np.asarray(self._values))

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "Sample":
        return cls(values)

    def append(self, x: float) -> None:
        x = float(x)
        self._values.append(x)
        if self._n == self._sorted.shape[0]:
            grown = np.empty(2 * self._n)
            grown[: self._n] = self._sorted[: self._n]
            self._sorted = grown
        idx = int(np.searchsorted(self._sorted[: self._n], x, side="right"))
        self._sorted[idx + 1 : self._n + 1] = self._sorted[idx : self._n]
        self._sorted[idx] = x
        self._n += 1

    @property
    def values(self) -> tuple:
        """Observations in insertion order."""
        return tuple(self._values)

    @property
    def sorted_values(self) -> np.ndarray:
        """Ascending view of the observations (do not mutate)."""
        return self._sorted[: self._n]

    def __len__(self) -> int:
        return self._n

    def __repr__(self) -> str:
        return f"Sample(n={self._n})"


def _require_nonempty(sample: Sample) -> None:
    if len(sample) == 0:
        raise InsufficientDataError("operation requires a non-empty sample")


def _validate_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def empirical_cdf(sample: Sample, y):
    """Fraction of observations <= y (ties counted in)."""
    _require_nonempty(sample)
    ys = sample.sorted_values
    out = np.searchsorted(ys, np.asarray(y, dtype=float), side="right") / len(sample)
    if np.ndim(y) == 0:
        return float(out)
    return out


def naive_quantile(sample: Sample, alpha: float) -> float:
    """Order statistic y_(ceil(alpha * t)) of the sample."""
    _require_nonempty(sample)
    _validate_alpha(alpha)
    t = len(sample)
    idx = _kernels.ceil_index(alpha * t)
    if idx > t:
        idx = t
    return float(sample.sorted_values[idx - 1])


def sample_cvar(sample: Sample, alpha: float) -> CvarEstimate:
    """Naive CVaR: mean of every observation >= the naive quantile.

    Ties at the quantile all enter the tail average.
    """
    _require_nonempty(sample)
    _validate_alpha(alpha)
    value, quantile = _kernels.sample_cvar_core(sample.sorted_values, alpha)
    return CvarEstimate(
        value=float(value), method=Method.SA, alpha=alpha, quantile=float(quantile)
    )
