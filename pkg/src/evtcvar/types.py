"""Shared result types produced by the estimators."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:  # pragma: no cover - import cycle guards
    from .confidence import ConfidenceInterval
    from .gpd_mle import GpdFit


class Method(str, Enum):
    """How a CVaR estimate was produced."""

    SA = "SA"
    EVT = "EVT"
    EVT_FALLBACK_SA = "EVT_FALLBACK_SA"


@dataclass(frozen=True)
class CvarEstimate:
    """A CVaR point estimate plus the ingredients that produced it.

    ``quantile`` is the tail quantile the estimate sits on (naive order
    statistic for SA, fitted tail quantile for EVT); ``threshold`` and
    ``fit`` are populated only on the EVT path.  The estimate never falls
    below its own quantile.
    """

    value: float
    method: Method
    alpha: float
    quantile: float
    threshold: Optional[float] = None
    fit: Optional["GpdFit"] = None
    ci: Optional["ConfidenceInterval"] = None

    def with_ci(self, ci: "ConfidenceInterval") -> "CvarEstimate":
        return CvarEstimate(
            value=self.value,
            method=self.method,
            alpha=self.alpha,
            quantile=self.quantile,
            threshold=self.threshold,
            fit=self.fit,
            ci=ci,
        )
