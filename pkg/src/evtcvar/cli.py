"""Command-line interface.

Subcommands: ``estimate`` (SA + EVT CVaR of a data file, optional CI),
``diagnose-threshold`` (per-candidate CSV of the threshold scan),
``single-arm`` / ``bandit`` (the simulation studies, preset- or
config-driven, flags override config fields), and ``presets``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import List, Optional

from .confidence import bootstrap_cvar_ci, delta_method_ci
from .distributions import RngStream
from .empirical import Sample, sample_cvar
from .errors import (
    CiUnavailableError,
    ConfigError,
    DomainError,
    EvtCvarError,
    InsufficientDataError,
    NonIntegrableTailError,
    ParameterError,
    SelectionFailureError,
)
from .evt_estimator import estimate_evt_cvar
from .experiments import (
    ExperimentConfig,
    KIND_BANDIT,
    KIND_SINGLE_ARM,
    PRESETS,
    preset_config,
    run_bandit_testbed,
    run_single_arm,
    write_metrics_csv,
)
from .threshold_select import ThresholdConfig, select_threshold
from .types import Method

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evtcvar",
        description="CVaR estimation for heavy-tailed costs: naive sample "
        "averaging vs. a generalized-Pareto tail estimator with automated "
        "threshold selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate the CVaR of a data file")
    est.add_argument("--input", required=True, help="newline-delimited real values")
    est.add_argument("--alpha", type=float, default=0.999)
    est.add_argument("--ci", choices=["none", "bootstrap", "delta"], default="none")
    est.add_argument("--level", type=float, default=0.9, help="CI confidence level")
    est.add_argument(
        "--boot-m", "--boot-M", dest="boot_m", type=int, default=1000,
        help="bootstrap resamples",
    )
    est.add_argument("--grid-size", type=int, default=50)
    est.add_argument("--gamma", type=float, default=0.1)
    est.add_argument("--seed", type=int, default=0)

    diag = sub.add_parser(
        "diagnose-threshold", help="per-candidate threshold diagnostics as CSV"
    )
    diag.add_argument("--input", required=True)
    diag.add_argument("--alpha", type=float, default=0.999)
    diag.add_argument("--grid-size", type=int, default=50)
    diag.add_argument("--gamma", type=float, default=0.1)
    diag.add_argument("--out", default=None, help="CSV path (default: stdout)")

    for kind in (KIND_SINGLE_ARM, KIND_BANDIT):
        name = "single-arm" if kind == KIND_SINGLE_ARM else "bandit"
        run = sub.add_parser(name, help=f"run the {name} simulation study")
        run.add_argument("--preset", default=None, help="named experiment preset")
        run.add_argument("--config", default=None, help="JSON config file")
        run.add_argument("--runs", type=int, default=None)
        run.add_argument("--horizon", type=int, default=None)
        run.add_argument("--alpha", type=float, default=None)
        run.add_argument("--grid-size", type=int, default=None)
        run.add_argument("--gamma", type=float, default=None)
        run.add_argument("--seed", type=int, default=None)
        run.add_argument("--workers", type=int, default=None)
        run.add_argument("--stride", type=int, default=None)
        run.add_argument("--record-start", type=int, default=None)
        run.add_argument("--out", default=None, help="metrics CSV path")
        run.add_argument(
            "--dump-config", default=None, help="write the effective config as JSON"
        )
        run.add_argument("--quiet", action="store_true", help="suppress progress ticks")

    sub.add_parser("presets", help="list named experiment presets")
    return parser


def _read_values(path: str) -> Sample:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read input file '{path}': {exc}") from exc
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: not a real number: {line!r}"
            ) from exc
    if not values:
        raise InsufficientDataError(f"input file '{path}' holds no values")
    return Sample(values)


def _cmd_estimate(args) -> int:
    sample = _read_values(args.input)
    cfg = ThresholdConfig(grid_size=args.grid_size, gamma=args.gamma)
    sa = sample_cvar(sample, args.alpha)
    evt = estimate_evt_cvar(sample, args.alpha, cfg)
    if args.ci == "bootstrap":
        ci = bootstrap_cvar_ci(
            sample, args.alpha, level=args.level, m=args.boot_m,
            rng=RngStream(args.seed, 0),
        )
        sa = sa.with_ci(ci)
    elif args.ci == "delta":
        if evt.method is Method.EVT:
            ys = sample.sorted_values
            excesses = ys[ys > evt.threshold] - evt.threshold
            try:
                ci = delta_method_ci(
                    evt.fit, evt.threshold, evt.quantile, excesses, level=args.level
                )
                evt = evt.with_ci(ci)
            except CiUnavailableError as exc:
                print(f"note: delta CI unavailable: {exc}", file=sys.stderr)
        else:
            print(
                "note: delta CI applies to the EVT estimate only, and the "
                "EVT pipeline fell back to SA here",
                file=sys.stderr,
            )
    print(f"n = {len(sample)}, alpha = {args.alpha}")
    print(f"SA  CVaR = {sa.value:.6g}   (tail quantile {sa.quantile:.6g})")
    if sa.ci:
        print(f"    {sa.ci.level:.0%} bootstrap CI [{sa.ci.lo:.6g}, {sa.ci.hi:.6g}]")
    tag = "EVT" if evt.method is Method.EVT else "EVT (SA fallback)"
    print(f"{tag} CVaR = {evt.value:.6g}   (tail quantile {evt.quantile:.6g})")
    if evt.method is Method.EVT:
        print(
            f"    threshold u = {evt.threshold:.6g}, "
            f"xi_hat = {evt.fit.xi_hat:.4f}, sigma_hat = {evt.fit.sigma_hat:.4f}, "
            f"{evt.fit.n_excesses} excesses"
        )
    if evt.ci:
        print(f"    {evt.ci.level:.0%} delta CI [{evt.ci.lo:.6g}, {evt.ci.hi:.6g}]")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    sample = _read_values(args.input)
    selection = select_threshold(
        sample, args.alpha, grid_size=args.grid_size, gamma=args.gamma
    )
    lines = [
        "quantile_level,u,n_excesses,xi_hat,sigma_hat,ad_stat,p_value,"
        "discarded_flag,chosen_flag"
    ]
    for cand in selection.candidates:
        xi = f"{cand.fit.xi_hat!r}" if cand.fit else ""
        sg = f"{cand.fit.sigma_hat!r}" if cand.fit else ""
        ad = f"{cand.ad_stat!r}" if cand.ad_stat is not None else ""
        pv = f"{cand.p_value!r}" if cand.p_value is not None else ""
        chosen = int(cand is selection.chosen)
        lines.append(
            f"{cand.quantile_level!r},{cand.u!r},{cand.n_excesses},"
            f"{xi},{sg},{ad},{pv},{int(cand.discarded)},{chosen}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write '{args.out}': {exc}") from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _effective_config(args, kind: str) -> ExperimentConfig:
    if args.preset and args.config:
        raise ConfigError("--preset and --config are mutually exclusive")
    if args.preset:
        cfg = preset_config(args.preset)
        if cfg.kind != kind:
            raise ConfigError(
                f"preset '{args.preset}' is a {cfg.kind} experiment, not {kind}"
            )
    elif args.config:
        try:
            with open(args.config) as fh:
                cfg = ExperimentConfig.from_json(fh.read())
        except OSError as exc:
            raise OSError(f"cannot read config '{args.config}': {exc}") from exc
        if cfg.kind != kind:
            raise ConfigError(f"config kind '{cfg.kind}' does not match {kind}")
    else:
        raise ConfigError("one of --preset or --config is required")
    overrides = {}
    for field_name, arg_name in [
        ("runs", "runs"),
        ("horizon", "horizon"),
        ("alpha", "alpha"),
        ("grid_size", "grid_size"),
        ("gamma", "gamma"),
        ("seed", "seed"),
        ("workers", "workers"),
        ("stride", "stride"),
        ("record_start", "record_start"),
        ("out", "out"),
    ]:
        value = getattr(args, arg_name)
        if value is not None:
            overrides[field_name] = value
    try:
        return replace(cfg, **overrides)
    except EvtCvarError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _progress_printer(quiet: bool):
    if quiet:
        return None

    def tick(done: int, total: int):
        print(f"\rrun {done}/{total} complete", end="", file=sys.stderr, flush=True)
        if done == total:
            print(file=sys.stderr)

    return tick


def _cmd_run(args, kind: str) -> int:
    cfg = _effective_config(args, kind)
    if args.dump_config:
        try:
            with open(args.dump_config, "w") as fh:
                fh.write(cfg.to_json() + "\n")
        except OSError as exc:
            raise OSError(f"cannot write config '{args.dump_config}': {exc}") from exc
    out = cfg.out or (f"{kind}_metrics.csv")
    progress = _progress_printer(args.quiet)
    if kind == KIND_SINGLE_ARM:
        rows = run_single_arm(cfg, progress)
    else:
        rows = run_bandit_testbed(cfg, progress)
    write_metrics_csv(rows, out, kind=kind)
    print(f"wrote {len(rows)} metric rows to {out}")
    return EXIT_OK


def _cmd_presets(_args) -> int:
    width = max(len(name) for name in PRESETS)
    for name in sorted(PRESETS):
        cfg, label = PRESETS[name]
        print(f"{name:<{width}}  {label}")
    return EXIT_OK


def parse_and_dispatch(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed a diagnostic; normalize its exit code
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "diagnose-threshold":
            return _cmd_diagnose(args)
        if args.command == "single-arm":
            return _cmd_run(args, KIND_SINGLE_ARM)
        if args.command == "bandit":
            return _cmd_run(args, KIND_BANDIT)
        if args.command == "presets":
            return _cmd_presets(args)
        raise ConfigError(f"unknown subcommand {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (
        InsufficientDataError,
        NonIntegrableTailError,
        SelectionFailureError,
        DomainError,
        ParameterError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
