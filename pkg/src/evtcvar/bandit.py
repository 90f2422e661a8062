"""Risk-averse epsilon-greedy bandit over heavy-tailed cost arms.

Each arm carries its own CVaR-estimator state (sample-average or EVT); the
policy picks the arm with the smallest current estimate, exploring uniformly
with schedule-driven probability.  Arm costs come from per-(run, arm)
counter-based streams, so an episode is a pure function of (seed, run index)
regardless of scheduling or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .distributions import Distribution, RngStream, cvar_exact, sample_iid
from .empirical import Sample, sample_cvar
from .errors import ConfigError, DomainError, ParameterError
from .evt_estimator import estimate_evt_cvar
from .threshold_select import DEFAULT_THRESHOLD_CONFIG, ThresholdConfig
from .types import CvarEstimate, Method

__all__ = [
    "Schedule",
    "BanditEnv",
    "ArmState",
    "PullRecord",
    "policy_probabilities",
    "init_arm_states",
    "step",
    "run_episode",
]

# Stream-id slot used for the policy's own randomness (one past the arms).
_POLICY_STREAM_SLOT = 10_000


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant exploration schedule.

    ``segments`` is a sequence of (until_stage, epsilon) pairs with strictly
    increasing stage bounds; stage t uses the first segment with
    t <= until_stage.
    """

    segments: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        if not self.segments:
            raise ConfigError("schedule needs at least one segment")
        prev = 0
        for until, eps in self.segments:
            if until <= prev:
                raise ConfigError(
                    f"schedule stage bounds must increase, got {self.segments}"
                )
            if not 0.0 <= eps <= 1.0:
                raise ConfigError(f"epsilon must lie in [0, 1], got {eps}")
            prev = until

    @property
    def horizon_covered(self) -> int:
        return self.segments[-1][0]

    def epsilon_at(self, t: int) -> float:
        if t < 1:
            raise DomainError(f"stage must be >= 1, got {t}")
        for until, eps in self.segments:
            if t <= until:
                return eps
        raise DomainError(
            f"stage {t} beyond the schedule (covers 1..{self.horizon_covered})"
        )


class BanditEnv:
    """k cost arms plus the exact-CVaR oracle used only for metrics.

    The oracle labels the least-risky arm (minimum exact CVaR, lowest index
    on ties); the agent never sees it.
    """

    def __init__(
        self,
        arms: Sequence[Distribution],
        horizon: int,
        alpha: float,
        seed: int = 0,
    ):
        if len(arms) < 1:
            raise ConfigError("need at least one arm")
        if horizon < 0:
            raise ConfigError(f"horizon must be >= 0, got {horizon}")
        if not 0.0 < alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
        self.arms = tuple(arms)
        self.horizon = int(horizon)
        self.alpha = float(alpha)
        self.seed = int(seed)
        self.exact_cvars = tuple(cvar_exact(d, alpha) for d in self.arms)
        self.best_arm = int(np.argmin(self.exact_cvars))

    @property
    def k(self) -> int:
        return len(self.arms)


@dataclass
class ArmState:
    """Mutable per-arm estimator state within one episode."""

    index: int
    sample: Sample = field(default_factory=Sample)
    pulls: int = 0
    estimate: Optional[CvarEstimate] = None
    estimate_value: float = 0.0
    costs: Optional[np.ndarray] = None  # pre-drawn per-(run, arm) cost stream

    def next_cost(self) -> float:
        if self.costs is None or self.pulls >= self.costs.shape[0]:
            raise ConfigError(f"arm {self.index} cost stream exhausted")
        return float(self.costs[self.pulls])


@dataclass(frozen=True)
class PullRecord:
    t: int
    arm: int
    cost: float
    was_exploratory: bool
    was_best_arm: bool


def policy_probabilities(estimates, epsilon: float, k: Optional[int] = None) -> np.ndarray:
    """Epsilon-greedy selection probabilities over the arms.

    The greedy arm (argmin of the estimates, lowest index on ties) gets
    1 - epsilon + epsilon/k; every other arm gets epsilon/k.
    """
    values = np.asarray(estimates, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ParameterError("estimates must be a non-empty 1-d sequence")
    if k is not None and k != values.size:
        raise ParameterError(f"k={k} does not match {values.size} estimates")
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in [0, 1], got {epsilon}")
    n = values.size
    probs = np.full(n, epsilon / n)
    probs[int(np.argmin(values))] += 1.0 - epsilon
    return probs


def init_arm_states(env: BanditEnv, run_index: int) -> List[ArmState]:
    """Fresh arm states for a run, with costs pre-drawn from the per-(run,
    arm) streams.  Estimates start at zero (no estimate object yet)."""
    states = []
    for j, dist in enumerate(env.arms):
        stream = RngStream(env.seed, (run_index, j))
        costs = sample_iid(dist, env.horizon, stream)
        states.append(ArmState(index=j, costs=costs))
    return states


def _select_arm(values, epsilon: float, rng: RngStream) -> Tuple[int, bool]:
    """Two-stage draw realizing the epsilon-greedy probabilities: an
    exploration coin, then a uniform arm on the exploring branch."""
    k = len(values)
    u = rng.random()
    if u < epsilon:
        arm = min(int(rng.random() * k), k - 1)
        return arm, True
    return int(np.argmin(values)), False


def step(
    env: BanditEnv,
    states: List[ArmState],
    schedule: Schedule,
    method: Method,
    t: int,
    rng: RngStream,
    config: Optional[ThresholdConfig] = None,
) -> PullRecord:
    """Play one stage: pick an arm, observe its cost, refine that arm's
    estimate; every other arm's estimate is left untouched."""
    if not 1 <= t <= env.horizon:
        raise DomainError(f"stage {t} outside 1..{env.horizon}")
    if method not in (Method.SA, Method.EVT):
        raise ParameterError(f"method must be SA or EVT, got {method}")
    eps = schedule.epsilon_at(t)
    values = [s.estimate_value for s in states]
    arm, exploratory = _select_arm(values, eps, rng)
    state = states[arm]
    cost = state.next_cost()
    state.sample.append(cost)
    state.pulls += 1
    if method is Method.SA:
        est = sample_cvar(state.sample, env.alpha)
    else:
        est = estimate_evt_cvar(
            state.sample, env.alpha, config or DEFAULT_THRESHOLD_CONFIG
        )
    state.estimate = est
    state.estimate_value = est.value
    return PullRecord(
        t=t,
        arm=arm,
        cost=cost,
        was_exploratory=exploratory,
        was_best_arm=(arm == env.best_arm),
    )


def run_episode(
    env: BanditEnv,
    schedule: Schedule,
    method: Method,
    run_index: int,
    config: Optional[ThresholdConfig] = None,
) -> List[PullRecord]:
    """Play stages 1..horizon; deterministic given (env.seed, run_index)."""
    if env.horizon > 0 and schedule.horizon_covered < env.horizon:
        raise ConfigError(
            f"schedule covers stages 1..{schedule.horizon_covered} "
            f"but the horizon is {env.horizon}"
        )
    states = init_arm_states(env, run_index)
    policy_rng = RngStream(env.seed, (run_index, _POLICY_STREAM_SLOT))
    records = []
    for t in range(1, env.horizon + 1):
        records.append(step(env, states, schedule, method, t, policy_rng, config))
    return records
