"""Simulation studies: single-arm estimation quality and the bandit testbed.

Runs are embarrassingly parallel over a thread pool (the numerical kernels
release the GIL); every run owns its RNG streams keyed by (seed, run index),
and per-run results are reduced in run-index order, so metrics are invariant
to the worker count.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .bandit import BanditEnv, Schedule, run_episode
from .distributions import (
    Distribution,
    GeneralizedPareto,
    Lognormal,
    RngStream,
    Weibull,
    cvar_exact,
    distribution_from_config,
    distribution_to_config,
    sample_iid,
)
from .errors import ConfigError, InsufficientDataError, ParameterError
from .threshold_select import ThresholdConfig
from .types import Method

__all__ = [
    "ExperimentConfig",
    "SingleArmMetricRow",
    "BanditMetricRow",
    "MetricRow",
    "PRESETS",
    "preset_config",
    "recorded_stages",
    "run_single_arm",
    "run_bandit_testbed",
    "compute_rmse",
    "compute_fraction_closer",
    "write_metrics_csv",
]

CONFIG_VERSION = 1

KIND_SINGLE_ARM = "single_arm"
KIND_BANDIT = "bandit"

DEFAULT_SCHEDULE = Schedule(((1000, 1.0), (5000, 0.1)))


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one simulation study."""

    kind: str
    distributions: Tuple[Distribution, ...]
    alpha: float = 0.999
    runs: int = 1000
    horizon: int = 5000
    grid_size: int = 50
    gamma: float = 0.1
    schedule: Optional[Schedule] = None
    seed: int = 0
    workers: Optional[int] = None
    stride: int = 10
    record_start: int = 100
    out: Optional[str] = None
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if self.kind not in (KIND_SINGLE_ARM, KIND_BANDIT):
            raise ConfigError(f"unknown experiment kind '{self.kind}'")
        if not self.distributions:
            raise ConfigError("at least one distribution is required")
        if self.kind == KIND_SINGLE_ARM and len(self.distributions) != 1:
            raise ConfigError("single-arm experiments take exactly one distribution")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be >= 0, got {self.horizon}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.record_start < 1:
            raise ConfigError(f"record_start must be >= 1, got {self.record_start}")
        if self.kind == KIND_BANDIT and self.schedule is None:
            raise ConfigError("bandit experiments need a schedule")

    @property
    def threshold_config(self) -> ThresholdConfig:
        return ThresholdConfig(grid_size=self.grid_size, gamma=self.gamma)

    def to_dict(self) -> dict:
        doc = {
            "version": self.version,
            "kind": self.kind,
            "distributions": [distribution_to_config(d) for d in self.distributions],
            "alpha": self.alpha,
            "runs": self.runs,
            "horizon": self.horizon,
            "grid_size": self.grid_size,
            "gamma": self.gamma,
            "seed": self.seed,
            "workers": self.workers,
            "stride": self.stride,
            "record_start": self.record_start,
            "out": self.out,
        }
        if self.schedule is not None:
            doc["schedule"] = [
                {"until": until, "epsilon": eps} for until, eps in self.schedule.segments
            ]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        version = doc.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        try:
            dists = tuple(
                distribution_from_config(d) for d in doc["distributions"]
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"config is missing distributions: {exc}") from exc
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        schedule = None
        if doc.get("schedule") is not None:
            try:
                schedule = Schedule(
                    tuple(
                        (int(seg["until"]), float(seg["epsilon"]))
                        for seg in doc["schedule"]
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"malformed schedule: {exc}") from exc
        try:
            return cls(
                kind=str(doc["kind"]),
                distributions=dists,
                alpha=float(doc.get("alpha", 0.999)),
                runs=int(doc.get("runs", 1000)),
                horizon=int(doc.get("horizon", 5000)),
                grid_size=int(doc.get("grid_size", 50)),
                gamma=float(doc.get("gamma", 0.1)),
                schedule=schedule,
                seed=int(doc.get("seed", 0)),
                workers=doc.get("workers"),
                stride=int(doc.get("stride", 10)),
                record_start=int(doc.get("record_start", 100)),
                out=doc.get("out"),
            )
        except KeyError as exc:
            raise ConfigError(f"config is missing field {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class SingleArmMetricRow:
    t: int
    rmse_sa: float
    rmse_evt: float
    fraction_closer: float


@dataclass(frozen=True)
class BanditMetricRow:
    t: int
    pct_best_sa: float
    pct_best_evt: float


MetricRow = Union[SingleArmMetricRow, BanditMetricRow]


def compute_rmse(estimates, truth: float) -> float:
    """Root-mean-square deviation of per-run estimates from the truth."""
    values = np.asarray(estimates, dtype=float)
    if values.size == 0:
        raise InsufficientDataError("RMSE needs at least one estimate")
    return float(np.sqrt(np.mean((values - truth) ** 2)))


def compute_fraction_closer(evt, sa, truth: float) -> float:
    """Fraction of runs where the EVT estimate is strictly closer to the
    truth than the SA estimate (ties count against EVT)."""
    evt_v = np.asarray(evt, dtype=float)
    sa_v = np.asarray(sa, dtype=float)
    if evt_v.shape != sa_v.shape:
        raise ParameterError(
            f"length mismatch: {evt_v.shape} EVT vs {sa_v.shape} SA estimates"
        )
    if evt_v.size == 0:
        raise InsufficientDataError("fraction-closer needs at least one run")
    return float(np.mean(np.abs(evt_v - truth) < np.abs(sa_v - truth)))


def recorded_stages(config: ExperimentConfig) -> List[int]:
    """Stages at which single-arm metrics are recorded: record_start,
    record_start+stride, ..., always including the horizon."""
    start = min(config.record_start, config.horizon) if config.horizon else 1
    stages = list(range(start, config.horizon + 1, config.stride))
    if config.horizon >= 1 and (not stages or stages[-1] != config.horizon):
        stages.append(config.horizon)
    return stages


def _resolve_workers(config: ExperimentConfig) -> int:
    if config.workers is not None and int(config.workers) >= 1:
        return int(config.workers)
    env = os.environ.get("EVTCVAR_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"EVTCVAR_WORKERS must be an integer, got {env!r}") from exc
    return max(1, os.cpu_count() or 1)


def _map_runs(fn, count: int, workers: int, progress=None):
    """Apply fn over run indices, reducing in index order regardless of
    completion order so worker count never changes the result."""
    results = [None] * count
    if workers <= 1 or count <= 1:
        for i in range(count):
            results[i] = fn(i)
            if progress:
                progress(i + 1, count)
        return results
    done = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(fn, i): i for i in range(count)}
        for fut in as_completed(futures):
            results[futures[fut]] = fut.result()
            done += 1
            if progress:
                progress(done, count)
    return results


def run_single_arm(
    config: ExperimentConfig,
    progress: Optional[Callable[[int, int], None]] = None,
) -> List[SingleArmMetricRow]:
    """Stream costs run by run; at each recorded stage estimate the CVaR of
    the first t observations with both methods; aggregate RMSE and the
    fraction of runs where EVT lands closer."""
    if config.kind != KIND_SINGLE_ARM:
        raise ConfigError(f"run_single_arm needs kind '{KIND_SINGLE_ARM}'")
    dist = config.distributions[0]
    truth = cvar_exact(dist, config.alpha)
    stages = recorded_stages(config)
    if config.horizon == 0 or not stages:
        return []
    alpha = config.alpha
    grid_size = config.grid_size
    gamma = config.gamma

    def one_run(run_idx: int):
        stream = RngStream(config.seed, (run_idx, 0))
        costs = sample_iid(dist, config.horizon, stream)
        sa = np.empty(len(stages))
        evt = np.empty(len(stages))
        for si, t in enumerate(stages):
            ys = np.sort(costs[:t])
            sa[si] = _kernels.sample_cvar_core(ys, alpha)[0]
            evt[si] = _kernels.evt_estimate_core(
                ys,
                alpha,
                grid_size,
                gamma,
                _kernels.MIN_EXCESSES,
                _kernels.SA_FALLBACK_MIN,
            )[0]
        return sa, evt

    results = _map_runs(one_run, config.runs, _resolve_workers(config), progress)
    sa_mat = np.stack([r[0] for r in results])
    evt_mat = np.stack([r[1] for r in results])
    rows = []
    for si, t in enumerate(stages):
        rows.append(
            SingleArmMetricRow(
                t=t,
                rmse_sa=compute_rmse(sa_mat[:, si], truth),
                rmse_evt=compute_rmse(evt_mat[:, si], truth),
                fraction_closer=compute_fraction_closer(
                    evt_mat[:, si], sa_mat[:, si], truth
                ),
            )
        )
    return rows


def run_bandit_testbed(
    config: ExperimentConfig,
    progress: Optional[Callable[[int, int], None]] = None,
) -> List[BanditMetricRow]:
    """Play the testbed with both estimators; the per-stage metric is the
    fraction of runs whose stage-t pull hit the arm with minimal exact CVaR
    (every pull counts, exploratory or greedy)."""
    if config.kind != KIND_BANDIT:
        raise ConfigError(f"run_bandit_testbed needs kind '{KIND_BANDIT}'")
    if config.horizon == 0:
        return []
    env = BanditEnv(
        arms=config.distributions,
        horizon=config.horizon,
        alpha=config.alpha,
        seed=config.seed,
    )
    schedule = config.schedule
    tcfg = config.threshold_config
    workers = _resolve_workers(config)
    total = 2 * config.runs
    tick_base = {"done": 0}

    def tracked(done, _count):
        if progress:
            progress(tick_base["done"] + done, total)

    def best_hits(method: Method):
        def one_run(run_idx: int):
            records = run_episode(env, schedule, method, run_idx, tcfg)
            return np.fromiter(
                (r.was_best_arm for r in records), dtype=np.uint8, count=len(records)
            )

        hits = _map_runs(one_run, config.runs, workers, tracked)
        tick_base["done"] += config.runs
        return np.stack(hits)

    sa_hits = best_hits(Method.SA)
    evt_hits = best_hits(Method.EVT)
    pct_sa = sa_hits.mean(axis=0)
    pct_evt = evt_hits.mean(axis=0)
    return [
        BanditMetricRow(t=t, pct_best_sa=float(pct_sa[t - 1]), pct_best_evt=float(pct_evt[t - 1]))
        for t in range(1, config.horizon + 1)
    ]


_SINGLE_ARM_HEADER = ["t", "rmse_sa", "rmse_evt", "fraction_closer"]
_BANDIT_HEADER = ["t", "pct_best_sa", "pct_best_evt"]


def write_metrics_csv(rows: Sequence[MetricRow], path: str, kind: Optional[str] = None) -> None:
    """Write metric rows (ordered by stage) as CSV; header-only on empty."""
    if rows:
        kind = KIND_BANDIT if isinstance(rows[0], BanditMetricRow) else KIND_SINGLE_ARM
    header = _BANDIT_HEADER if kind == KIND_BANDIT else _SINGLE_ARM_HEADER
    ordered = sorted(rows, key=lambda r: r.t)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in ordered:
                if isinstance(row, BanditMetricRow):
                    fh.write(f"{row.t},{row.pct_best_sa!r},{row.pct_best_evt!r}\n")
                else:
                    fh.write(
                        f"{row.t},{row.rmse_sa!r},{row.rmse_evt!r},{row.fraction_closer!r}\n"
                    )
    except OSError as exc:
        raise OSError(f"cannot write metrics to '{path}': {exc}") from exc


def _single_preset(dist: Distribution, label: str) -> Tuple[ExperimentConfig, str]:
    cfg = ExperimentConfig(kind=KIND_SINGLE_ARM, distributions=(dist,))
    return cfg, label


def _bandit_preset(arms, label: str) -> Tuple[ExperimentConfig, str]:
    cfg = ExperimentConfig(
        kind=KIND_BANDIT,
        distributions=tuple(arms),
        schedule=DEFAULT_SCHEDULE,
    )
    return cfg, label


PRESETS = {
    "fig1a": _single_preset(GeneralizedPareto(0.4, 1.0), "single-arm GPD(xi=0.4, sigma=1), RMSE view"),
    "fig1b": _single_preset(GeneralizedPareto(0.4, 1.0), "single-arm GPD(xi=0.4, sigma=1), fraction-closer view"),
    "fig1c": _single_preset(GeneralizedPareto(0.8, 1.0), "single-arm GPD(xi=0.8, sigma=1), RMSE view"),
    "fig1d": _single_preset(GeneralizedPareto(0.8, 1.0), "single-arm GPD(xi=0.8, sigma=1), fraction-closer view"),
    "fig2a": _single_preset(Lognormal(0.0, 0.5), "single-arm Lognormal(mu=0, sigma=0.5), RMSE view"),
    "fig2b": _single_preset(Lognormal(0.0, 0.5), "single-arm Lognormal(mu=0, sigma=0.5), fraction-closer view"),
    "fig2c": _single_preset(Lognormal(0.0, 0.9), "single-arm Lognormal(mu=0, sigma=0.9), RMSE view"),
    "fig2d": _single_preset(Lognormal(0.0, 0.9), "single-arm Lognormal(mu=0, sigma=0.9), fraction-closer view"),
    "fig3a": _single_preset(Weibull(1.25, 1.0), "single-arm Weibull(kappa=1.25, lambda=1), RMSE view"),
    "fig3b": _single_preset(Weibull(1.25, 1.0), "single-arm Weibull(kappa=1.25, lambda=1), fraction-closer view"),
    "fig3c": _single_preset(Weibull(1.75, 1.0), "single-arm Weibull(kappa=1.75, lambda=1), RMSE view"),
    "fig3d": _single_preset(Weibull(1.75, 1.0), "single-arm Weibull(kappa=1.75, lambda=1), fraction-closer view"),
    "fig4a": _bandit_preset(
        [GeneralizedPareto(x, 1.0) for x in (0.4, 0.5, 0.6, 0.7, 0.8)],
        "5-armed testbed, GPD arms sigma=1, xi in {0.4..0.8}",
    ),
    "fig4b": _bandit_preset(
        [Lognormal(1.0, s) for s in (0.5, 0.6, 0.7, 0.8, 0.9)],
        "5-armed testbed, lognormal arms mu=1, sigma in {0.5..0.9}",
    ),
    "fig4c": _bandit_preset(
        [Weibull(k, 1.0) for k in (0.75, 1.0, 1.25, 1.5, 1.75)],
        "5-armed testbed, Weibull arms lambda=1, kappa in {0.75..1.75}",
    ),
}


def preset_config(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name][0]
    except KeyError as exc:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset '{name}' (known: {known})") from exc
