"""Batch command line front end.

Commands write plot-ready CSV files, a ``config_snapshot.ini`` and a
``manifest.json`` into ``--out``. Exit status: 0 success, 2 configuration or
input error, 3 runtime/numerical error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import (
    RunConfig,
    dump_config,
    parse_config,
    parse_list,
    parse_resolution,
    read_config,
    require_simulation,
    with_resolution,
)
from .errors import ConfigurationError, DomainError, ParseError, RebalancingError
from .experiments import (
    compare_strategies,
    subset_experiment,
    subset_simulation,
    sweep_heatmap,
    sweep_partial_coefficient,
    sweep_rebalance_period,
)
from .market_data import align_calendars, load_directory
from .metrics import Averaging
from .stochastic_market import RNG_DESCRIPTION, format_float, write_market_csv

log = logging.getLogger("rebalancing")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
SNAPSHOT = "config_snapshot.ini"
MANIFEST = "manifest.json"


class UsageError(ConfigurationError):
    pass


# --------------------------------------------------------------------------
# writers


def write_growth_csv(series, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "growth", "run_count"])
        for t, g in zip(series.times, series.growth):
            writer.writerow([format_float(t), format_float(g), series.run_count])


def write_trajectory_csv(trajectory, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "wealth", "fee_paid"])
        for t, w, f in zip(trajectory.grid.times, trajectory.wealth, trajectory.fees_paid):
            writer.writerow([format_float(t), format_float(w), format_float(f)])


def _axis_text(value):
    return str(value) if isinstance(value, int) else format_float(value)


def write_sweep_csv(result, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([result.row_axis, result.col_axis, "final_growth", "std_err", "runs"])
        for i, rv in enumerate(result.row_values):
            for j, cv in enumerate(result.col_values):
                writer.writerow([
                    _axis_text(rv),
                    _axis_text(cv),
                    format_float(result.final_growth[i, j]),
                    format_float(result.std_err[i, j]),
                    result.runs,
                ])


def write_heatmap_grid(result, path):
    """Dense grid: header row of column-axis values, one row per row-axis value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"{result.row_axis}\\{result.col_axis}", *(_axis_text(c) for c in result.col_values)])
        for i, rv in enumerate(result.row_values):
            writer.writerow([_axis_text(rv), *(format_float(g) for g in result.final_growth[i])])


def _write_series_map(results, out):
    files = []
    for spec, series in results.items():
        name = f"growth_{spec.label}.csv"
        write_growth_csv(series, out / name)
        files.append(name)
    return files


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out, command, run, args, files, started, extra=None):
    cfg = run.experiment
    manifest = {
        "engine": "rebalancing",
        "version": __version__,
        "command": command,
        "arguments": {k: v for k, v in (args or {}).items() if v is not None},
        "config_snapshot": dump_config(run),
        "master_seed": cfg.master_seed,
        "fee_resolution": cfg.strategies[0].fee_resolution.describe() if cfg.strategies else "single",
        "averaging": cfg.averaging.value,
        "rng": RNG_DESCRIPTION,
        "outputs": {name: _sha256(out / name) for name in files},
        "duration_seconds": round(time.perf_counter() - started, 3),
    }
    if extra:
        manifest.update(extra)
    with open(out / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# --------------------------------------------------------------------------
# config handling


def _load(args) -> RunConfig:
    run = read_config(args.config)
    cfg = run.experiment
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
        cfg = replace(cfg, master_seed=args.seed)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.averaging is not None:
        cfg = replace(cfg, averaging=Averaging(args.averaging))
    if args.fee_resolution is not None:
        current = cfg.strategies[0].fee_resolution if cfg.strategies else None
        tolerance = getattr(current, "tolerance", 1e-10)
        iterations = getattr(current, "max_iterations", 100)
        cfg = with_resolution(cfg, parse_resolution(args.fee_resolution, tolerance, iterations))
    return replace(run, experiment=cfg)


def _prepare_out(args, run) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / SNAPSHOT).write_text(dump_config(run))
    return out


def _common_args(args):
    return {
        "seed": args.seed,
        "workers": args.workers,
        "averaging": args.averaging,
        "fee_resolution": args.fee_resolution,
    }


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    run = _load(args)
    require_simulation(run.experiment)
    out = _prepare_out(args, run)
    results = compare_strategies(run.experiment)
    files = [SNAPSHOT, *_write_series_map(results, out)]
    _write_manifest(out, "simulate", run, _common_args(args), files, started)
    log.info("wrote %d series to %s", len(results), out)
    return EXIT_OK


def _parse_axes(args, cfg):
    axes = {}
    for item in args.axis or []:
        name, sep, values = item.partition("=")
        name = name.strip()
        if not sep:
            raise UsageError(f"axis must look like NAME=v1,v2,..., got {item!r}")
        key = {"m": "m", "D": "D", "d": "D", "alpha": "alpha"}.get(name)
        if key is None:
            raise UsageError(f"unknown sweep axis {name!r} (use m, D or alpha)")
        axes[key] = values
    if args.alpha is not None:
        axes["alpha"] = args.alpha
    try:
        parsed = {
            "m": parse_list(axes["m"], int) if "m" in axes else cfg.m_values,
            "D": parse_list(axes["D"], float) if "D" in axes else cfg.D_values,
            "alpha": parse_list(axes["alpha"], float) if "alpha" in axes else cfg.alpha_values,
        }
    except ValueError as exc:
        raise UsageError(f"sweep values must be numbers ({exc})") from None
    for d in parsed["D"]:
        if not 0.0 <= d <= 1.0:
            raise ConfigurationError(f"partial coefficient D must be in [0, 1], got {d!r}")
    for m in parsed["m"]:
        if m < 1:
            raise ConfigurationError(f"rebalance period m must be >= 1, got {m}")
    for a in parsed["alpha"]:
        if not 0.0 <= a < 1.0:
            raise ConfigurationError(f"fee rate alpha must be in [0, 1), got {a!r}")
    explicit = set(axes)
    return parsed, explicit


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    run = _load(args)
    cfg = run.experiment
    require_simulation(cfg)
    values, explicit = _parse_axes(args, cfg)
    chosen = {k for k in ("m", "D") if k in explicit} or {k for k in ("m", "D") if values[k]}
    alphas = values["alpha"] or (cfg.fee.alpha,)
    resolution = cfg.strategies[0].fee_resolution if cfg.strategies else None

    if chosen == {"m", "D"}:
        if len(alphas) > 1:
            raise UsageError("the m x D heatmap takes a single alpha")
        cfg = replace(cfg, fee=replace(cfg.fee, alpha=alphas[0]))
        run = replace(run, experiment=cfg)
        out = _prepare_out(args, run)
        result = sweep_heatmap(cfg, values["m"], values["D"], resolution)
        write_sweep_csv(result, out / "sweep.csv")
        write_heatmap_grid(result, out / "heatmap_grid.csv")
        files = [SNAPSHOT, "sweep.csv", "heatmap_grid.csv"]
    elif chosen == {"m"}:
        out = _prepare_out(args, run)
        result = sweep_rebalance_period(cfg, values["m"], alphas, resolution)
        write_sweep_csv(result, out / "sweep.csv")
        files = [SNAPSHOT, "sweep.csv"]
    elif chosen == {"D"}:
        out = _prepare_out(args, run)
        result = sweep_partial_coefficient(cfg, values["D"], alphas, resolution)
        write_sweep_csv(result, out / "sweep.csv")
        files = [SNAPSHOT, "sweep.csv"]
    else:
        raise UsageError("sweep needs an m and/or D axis (--axis m=... / --axis D=...)")

    arguments = _common_args(args)
    arguments["axis"] = args.axis
    arguments["alpha"] = args.alpha
    _write_manifest(out, "sweep", run, arguments, files, started)
    return EXIT_OK


def _subset_outputs(out, results, started, command, run, args, extra_files=(), extra=None):
    files = [SNAPSHOT, *extra_files, *_write_series_map(results, out)]
    _write_manifest(out, command, run, args, files, started, extra)
    return EXIT_OK


def cmd_backtest(args) -> int:
    started = time.perf_counter()
    run = _load(args)
    cfg = run.experiment
    series = load_directory(args.data, run.data.price_column)
    if not 1 <= cfg.n_assets <= len(series):
        raise ConfigurationError(
            f"portfolio size n={cfg.n_assets} must be between 1 and the {len(series)} tickers found"
        )
    market, report = align_calendars(series, run.data.trading_days)
    out = _prepare_out(args, run)
    write_market_csv(market, out / "market.csv")
    with open(out / "alignment.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    results = subset_experiment(
        market,
        cfg.n_assets,
        cfg.mcs_runs,
        cfg.strategies,
        cfg.fee,
        cfg.alloc,
        seed=cfg.master_seed,
        averaging=cfg.averaging,
        workers=cfg.workers,
    )
    inputs = {p.name: _sha256(p) for p in sorted(Path(args.data).glob("*")) if p.suffix.lower() == ".csv"}
    arguments = _common_args(args)
    arguments["data"] = str(args.data)
    return _subset_outputs(
        out, results, started, "backtest", run, arguments,
        extra_files=("market.csv", "alignment.json"), extra={"inputs": inputs},
    )


def cmd_subset_sim(args) -> int:
    started = time.perf_counter()
    run = _load(args)
    cfg = run.experiment
    require_simulation(cfg)
    if cfg.universe_size is None:
        raise ConfigurationError("subset-sim needs experiment.universe_size")
    out = _prepare_out(args, run)
    results = subset_simulation(cfg)
    return _subset_outputs(out, results, started, "subset-sim", run, _common_args(args))


def cmd_rerun(args) -> int:
    """Re-execute a run from its manifest into a new output directory."""
    manifest = json.loads(Path(args.manifest).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snapshot = out / SNAPSHOT
    snapshot.write_text(manifest["config_snapshot"])
    parse_config(manifest["config_snapshot"], source=str(args.manifest))
    argv = [manifest["command"], "--config", str(snapshot), "--out", str(out)]
    arguments = manifest.get("arguments", {})
    if "data" in arguments:
        argv += ["--data", arguments["data"]]
    for item in arguments.get("axis") or []:
        argv += ["--axis", item]
    if arguments.get("alpha") is not None:
        argv += ["--alpha", arguments["alpha"]]
    return main(argv)


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rebalancing", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="INI experiment config")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, help="override experiment.master_seed")
    common.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    common.add_argument("--fee-resolution", choices=["single", "fixedpoint"])
    common.add_argument("--averaging", choices=[a.value for a in Averaging])

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo strategy comparison")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="final-growth parameter sweeps")
    p.add_argument("--axis", action="append", metavar="NAME=V1,V2,...", help="sweep axis: m, D or alpha")
    p.add_argument("--alpha", help="fee rates, comma separated")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("backtest", parents=[common], help="subset sampling on ingested price data")
    p.add_argument("--data", required=True, help="directory of per-ticker CSV files")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("subset-sim", parents=[common], help="subset sampling on a simulated universe")
    p.set_defaults(func=cmd_subset_sim)

    p = sub.add_parser("rerun", help="re-execute a run from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ParseError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RebalancingError, DomainError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
