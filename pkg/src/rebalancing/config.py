"""INI experiment configs.

Example::

    [grid]
    horizon = 300
    dt = 0.1

    [model]
    drift = 0.5
    volatility = 1.0
    s0 = 1.0

    [experiment]
    n_assets = 8
    mcs_runs = 1000
    master_seed = 2019
    ; universe_size = 20          (subset protocol only)
    ; averaging = growth          (growth | wealth)
    ; initial_wealth = 1.0

    [fee]
    alpha = 0.03
    ; charge_initial_purchase = false
    ; resolution = single         (single | fixedpoint)
    ; tolerance = 1e-10
    ; max_iterations = 100

    [strategies]
    ; <name> = <kind> [m=<int>] [D=<real>]
    passive = passive
    balanced = balanced
    periodic = periodic m=10
    partial = partial D=0.5
    combined = periodic_partial m=10 D=0.5

    [sweep]
    m_values = 1, 2, 5, 10
    D_values = 0, 0.25, 0.5, 0.75, 1
    alpha_values = 0, 0.01, 0.03

    [data]
    trading_days = 252
    price_column = close

Missing ``[grid]``/``[model]`` sections are allowed for backtests, where the
grid comes from the data.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigurationError
from .experiments import ExperimentConfig, default_strategies
from .metrics import Averaging
from .portfolio_core import FeeModel
from .stochastic_market import GbmParams, build_time_grid
from .strategies import FixedPoint, GivenWealth, SinglePass, StrategyKind, StrategySpec


@dataclass(frozen=True)
class DataSettings:
    trading_days: int = 252
    price_column: str = "close"


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig
    data: DataSettings
    horizon: float | None = None  # as written in the file; the grid may round it


def read_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config(path.read_text(), source=str(path))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep strategy names and D/m case
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    try:
        return _build(parser)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigurationError):
            raise ConfigurationError(f"{source}: {exc}") from None
        raise ConfigurationError(f"{source}: invalid value ({exc})") from None


def _section(parser, name):
    return parser[name] if parser.has_section(name) else {}


def _bool(value):
    lowered = str(value).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {value!r}")


def parse_list(text, cast=float) -> tuple:
    items = [x.strip() for x in str(text).replace(";", ",").split(",")]
    return tuple(cast(x) for x in items if x)


def _int(value):
    number = float(value)
    if number != int(number):
        raise ConfigurationError(f"not an integer: {value!r}")
    return int(number)


def parse_resolution(name, tolerance=1e-10, max_iterations=100):
    name = str(name).strip().lower()
    if name in ("single", "singlepass", "single_pass"):
        return SinglePass()
    if name in ("fixedpoint", "fixed_point", "fixed-point"):
        return FixedPoint(float(tolerance), int(max_iterations))
    raise ConfigurationError(f"unknown fee resolution {name!r} (use single or fixedpoint)")


def parse_strategy(text, resolution=SinglePass()) -> StrategySpec:
    tokens = str(text).split()
    if not tokens:
        raise ConfigurationError("empty strategy definition")
    try:
        kind = StrategyKind(tokens[0].lower())
    except ValueError:
        raise ConfigurationError(f"unknown strategy kind {tokens[0]!r}") from None
    params = {}
    for token in tokens[1:]:
        key, sep, value = token.partition("=")
        if not sep or key not in ("m", "D"):
            raise ConfigurationError(f"bad strategy parameter {token!r} (expected m=<int> or D=<real>)")
        params[key] = value
    return StrategySpec(
        kind,
        period=_int(params.get("m", 1)),
        partial=float(params.get("D", 1.0)),
        fee_resolution=resolution,
    )


def _build(parser) -> RunConfig:
    grid_s, model_s = _section(parser, "grid"), _section(parser, "model")
    exp_s, fee_s = _section(parser, "experiment"), _section(parser, "fee")
    sweep_s, data_s = _section(parser, "sweep"), _section(parser, "data")

    grid = horizon = None
    if grid_s:
        horizon = float(grid_s["horizon"])
        grid = build_time_grid(horizon, float(grid_s["dt"]))
    model = None
    if model_s:
        model = GbmParams(
            float(model_s["drift"]), float(model_s["volatility"]), float(model_s.get("s0", 1.0))
        )

    resolution = parse_resolution(
        fee_s.get("resolution", "single"),
        fee_s.get("tolerance", 1e-10),
        fee_s.get("max_iterations", 100),
    )
    fee = FeeModel(float(fee_s.get("alpha", 0.0)), _bool(fee_s.get("charge_initial_purchase", "false")))

    if parser.has_section("strategies") and len(parser["strategies"]):
        strategies = tuple(parse_strategy(v, resolution) for v in parser["strategies"].values())
    else:
        strategies = tuple(replace(s, fee_resolution=resolution) for s in default_strategies())

    universe = exp_s.get("universe_size")
    experiment = ExperimentConfig(
        grid=grid,
        model=model,
        n_assets=_int(exp_s.get("n_assets", 2)),
        mcs_runs=_int(exp_s.get("mcs_runs", 1000)),
        fee=fee,
        strategies=strategies,
        master_seed=_int(exp_s.get("master_seed", 0)),
        universe_size=_int(universe) if universe not in (None, "") else None,
        alloc=GivenWealth(float(exp_s.get("initial_wealth", 1.0))),
        averaging=Averaging(exp_s.get("averaging", "growth").strip().lower()),
        workers=_int(exp_s.get("workers", 1)),
        m_values=parse_list(sweep_s.get("m_values", ""), _int),
        D_values=parse_list(sweep_s.get("D_values", ""), float),
        alpha_values=parse_list(sweep_s.get("alpha_values", ""), float),
    )
    data = DataSettings(_int(data_s.get("trading_days", 252)), data_s.get("price_column", "close").strip())
    return RunConfig(experiment, data, horizon)


def _num(x) -> str:
    return repr(float(x)) if not isinstance(x, int) else str(x)


def _strategy_text(spec: StrategySpec) -> str:
    text = spec.kind.value
    if spec.kind in (StrategyKind.PERIODIC, StrategyKind.PERIODIC_PARTIAL):
        text += f" m={spec.period}"
    if spec.kind in (StrategyKind.PARTIAL, StrategyKind.PERIODIC_PARTIAL):
        text += f" D={spec.partial!r}"
    return text


def dump_config(run: RunConfig) -> str:
    """Canonical INI text; :func:`parse_config` on it rebuilds ``run``."""
    cfg = run.experiment
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if cfg.grid is not None:
        horizon = run.horizon if run.horizon is not None else cfg.grid.horizon
        parser["grid"] = {"horizon": _num(horizon), "dt": _num(cfg.grid.dt)}
    if cfg.model is not None:
        parser["model"] = {
            "drift": _num(cfg.model.drift),
            "volatility": _num(cfg.model.volatility),
            "s0": _num(cfg.model.s0),
        }
    experiment = {
        "n_assets": str(cfg.n_assets),
        "mcs_runs": str(cfg.mcs_runs),
        "master_seed": str(cfg.master_seed),
        "averaging": cfg.averaging.value,
        "initial_wealth": _num(cfg.alloc.wealth),
    }
    if cfg.universe_size is not None:
        experiment["universe_size"] = str(cfg.universe_size)
    parser["experiment"] = experiment
    resolution = cfg.strategies[0].fee_resolution if cfg.strategies else SinglePass()
    fee = {
        "alpha": _num(cfg.fee.alpha),
        "charge_initial_purchase": str(cfg.fee.charge_initial_purchase).lower(),
        "resolution": "fixedpoint" if isinstance(resolution, FixedPoint) else "single",
    }
    if isinstance(resolution, FixedPoint):
        fee["tolerance"] = _num(resolution.tolerance)
        fee["max_iterations"] = str(resolution.max_iterations)
    parser["fee"] = fee
    parser["strategies"] = {spec.label: _strategy_text(spec) for spec in cfg.strategies}
    sweep = {}
    if cfg.m_values:
        sweep["m_values"] = ", ".join(str(m) for m in cfg.m_values)
    if cfg.D_values:
        sweep["D_values"] = ", ".join(_num(d) for d in cfg.D_values)
    if cfg.alpha_values:
        sweep["alpha_values"] = ", ".join(_num(a) for a in cfg.alpha_values)
    if sweep:
        parser["sweep"] = sweep
    parser["data"] = {"trading_days": str(run.data.trading_days), "price_column": run.data.price_column}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def with_resolution(cfg: ExperimentConfig, resolution) -> ExperimentConfig:
    return replace(cfg, strategies=tuple(replace(s, fee_resolution=resolution) for s in cfg.strategies))


def require_simulation(cfg: ExperimentConfig) -> None:
    if cfg.grid is None or cfg.model is None:
        raise ConfigurationError("config needs [grid] and [model] sections for simulated markets")

