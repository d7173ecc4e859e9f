"""Monte Carlo strategy comparison, parameter sweeps and subset sampling.

Run ``r`` of an experiment always sees the market simulated from seed key
``(master_seed, r, asset)``; every strategy and every sweep cell is
evaluated on those same markets. Runs are processed in fixed-size chunks,
optionally on a process pool, and reassembled in run order, so the output
does not depend on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .metrics import Averaging, GrowthSeries, growth_rows, run_stats, summarize_runs, summarize_wealth
from .portfolio_core import FeeModel
from .stochastic_market import GbmParams, Market, TimeGrid, make_rng, simulate_market
from .strategies import GivenWealth, InitialAllocation, StrategySpec, run_batch

CHUNK_RUNS = 50
SUBSET_STREAM = 0x5B5E7


def default_strategies(m: int = 10, D: float = 0.5) -> tuple:
    """The five strategies compared in the headline experiment."""
    return (
        StrategySpec.passive(),
        StrategySpec.balanced(),
        StrategySpec.periodic(m),
        StrategySpec.partial_balanced(D),
        StrategySpec.periodic_partial(m, D),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    grid: TimeGrid
    model: GbmParams
    n_assets: int
    mcs_runs: int = 1000
    fee: FeeModel = field(default_factory=FeeModel)
    strategies: tuple = field(default_factory=default_strategies)
    master_seed: int = 0
    universe_size: int | None = None
    alloc: InitialAllocation = field(default_factory=GivenWealth)
    averaging: Averaging = Averaging.GROWTH
    workers: int = 1
    m_values: tuple = ()
    D_values: tuple = ()
    alpha_values: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "averaging", Averaging(self.averaging))
        if self.n_assets < 1:
            raise ConfigurationError(f"n_assets must be >= 1, got {self.n_assets}")
        if self.mcs_runs < 1:
            raise ConfigurationError(f"MCS run count must be >= 1, got {self.mcs_runs}")
        if self.universe_size is not None and not (1 <= self.n_assets <= self.universe_size):
            raise ConfigurationError(
                f"need 1 <= n <= N, got n={self.n_assets}, N={self.universe_size}"
            )
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if self.master_seed < 0:
            raise ConfigurationError("master seed must be non-negative")


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Final growth ``g(T)`` over a two-axis grid of parameters.

    ``final_growth[i, j]`` belongs to ``row_values[i]`` and ``col_values[j]``.
    """

    row_axis: str
    row_values: tuple
    col_axis: str
    col_values: tuple
    final_growth: np.ndarray
    std_err: np.ndarray
    runs: int

    def cell(self, row_value, col_value) -> tuple[float, float]:
        i = self.row_values.index(row_value)
        j = self.col_values.index(col_value)
        return float(self.final_growth[i, j]), float(self.std_err[i, j])

    def column(self, col_value) -> np.ndarray:
        return self.final_growth[:, self.col_values.index(col_value)]

    def row(self, row_value) -> np.ndarray:
        return self.final_growth[self.row_values.index(row_value)]

    def __eq__(self, other):
        if not isinstance(other, SweepResult):
            return NotImplemented
        return (
            (self.row_axis, self.row_values, self.col_axis, self.col_values, self.runs)
            == (other.row_axis, other.row_values, other.col_axis, other.col_values, other.runs)
            and np.array_equal(self.final_growth, other.final_growth)
            and np.array_equal(self.std_err, other.std_err)
        )


@dataclass(frozen=True)
class SubsetDraw:
    run: int
    indices: tuple


def pooled_std_err(*errors: float) -> float:
    return math.sqrt(sum(e * e for e in errors))


# --------------------------------------------------------------------------
# work distribution


def _chunks(total: int):
    return [(start, min(start + CHUNK_RUNS, total)) for start in range(0, total, CHUNK_RUNS)]


def _map(func, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def _simulated_prices(config: ExperimentConfig, start: int, stop: int) -> np.ndarray:
    return np.stack(
        [
            simulate_market(config.n_assets, config.model, config.grid, (config.master_seed, r)).prices
            for r in range(start, stop)
        ]
    )


def _per_run(batch, averaging):
    """Per-run rows that feed the final aggregation."""
    if averaging is Averaging.GROWTH:
        return growth_rows(batch.wealth, batch.grid)
    return batch.wealth


def _aggregate(grid, rows, averaging) -> GrowthSeries:
    if averaging is Averaging.GROWTH:
        return summarize_runs(grid, rows)
    return summarize_wealth(grid, rows)


def _final_cells(grid, rows, averaging):
    """``(mean, std_err)`` of g(T) from per-run final values."""
    mean, err = run_stats(np.asarray(rows, dtype=np.float64))
    if averaging is Averaging.GROWTH:
        return float(mean), float(err)
    horizon = grid.horizon
    return math.log(mean) / horizon, float(err / mean / horizon)


def _final_values(batch, averaging):
    if averaging is Averaging.GROWTH:
        return growth_rows(batch.wealth, batch.grid)[:, -1]
    return batch.wealth[:, -1] / batch.wealth[:, 0]


# --------------------------------------------------------------------------
# strategy comparison


def _compare_chunk(task):
    config, start, stop = task
    prices = _simulated_prices(config, start, stop)
    return [
        _per_run(run_batch(prices, spec, config.alloc, config.fee, grid=config.grid, run_offset=start), config.averaging)
        for spec in config.strategies
    ]


def compare_strategies(config: ExperimentConfig) -> dict:
    """Average growth series per strategy over ``mcs_runs`` simulated markets."""
    if not config.strategies:
        raise ConfigurationError("no strategies configured")
    tasks = [(config, a, b) for a, b in _chunks(config.mcs_runs)]
    parts = _map(_compare_chunk, tasks, config.workers)
    return {
        spec: _aggregate(config.grid, np.concatenate([p[s] for p in parts]), config.averaging)
        for s, spec in enumerate(config.strategies)
    }


# --------------------------------------------------------------------------
# sweeps


def _sweep_chunk(task):
    config, cells, start, stop = task
    prices = _simulated_prices(config, start, stop)
    return [
        _final_values(run_batch(prices, spec, config.alloc, fee, grid=config.grid, run_offset=start), config.averaging)
        for spec, fee in cells
    ]


def _sweep(config, row_axis, row_values, col_axis, col_values, make_cell) -> SweepResult:
    row_values, col_values = tuple(row_values), tuple(col_values)
    if not row_values or not col_values:
        raise ConfigurationError("sweep axes must be non-empty")
    cells = [make_cell(r, c) for r in row_values for c in col_values]
    tasks = [(config, cells, a, b) for a, b in _chunks(config.mcs_runs)]
    parts = _map(_sweep_chunk, tasks, config.workers)
    shape = (len(row_values), len(col_values))
    growth = np.empty(shape)
    err = np.empty(shape)
    for idx in range(len(cells)):
        values = np.concatenate([p[idx] for p in parts])
        growth.flat[idx], err.flat[idx] = _final_cells(config.grid, values, config.averaging)
    return SweepResult(row_axis, row_values, col_axis, col_values, growth, err, config.mcs_runs)


def _check_alphas(alpha_values):
    return tuple(FeeModel(float(a)).alpha for a in alpha_values)


def sweep_rebalance_period(config: ExperimentConfig, m_values: Sequence[int], alpha_values: Sequence[float], resolution=None) -> SweepResult:
    """g(T) of the periodically balanced strategy over rebalance period ``m`` and fee rate."""
    resolution = resolution or _resolution(config)
    m_values = tuple(int(m) for m in m_values)
    alpha_values = _check_alphas(alpha_values)
    return _sweep(
        config, "m", m_values, "alpha", alpha_values,
        lambda m, a: (StrategySpec.periodic(m, fee_resolution=resolution), replace(config.fee, alpha=a)),
    )


def sweep_partial_coefficient(config: ExperimentConfig, D_values: Sequence[float], alpha_values: Sequence[float], resolution=None) -> SweepResult:
    """g(T) of the partially balanced strategy over ``D`` and fee rate."""
    resolution = resolution or _resolution(config)
    D_values = tuple(float(d) for d in D_values)
    alpha_values = _check_alphas(alpha_values)
    return _sweep(
        config, "D", D_values, "alpha", alpha_values,
        lambda d, a: (StrategySpec.partial_balanced(d, fee_resolution=resolution), replace(config.fee, alpha=a)),
    )


def sweep_heatmap(config: ExperimentConfig, m_values: Sequence[int], D_values: Sequence[float], resolution=None) -> SweepResult:
    """g(T) of the periodic-partial strategy over ``m`` x ``D`` at the config's fee."""
    resolution = resolution or _resolution(config)
    m_values = tuple(int(m) for m in m_values)
    D_values = tuple(float(d) for d in D_values)
    return _sweep(
        config, "m", m_values, "D", D_values,
        lambda m, d: (StrategySpec.periodic_partial(m, d, fee_resolution=resolution), config.fee),
    )


def _resolution(config):
    for spec in config.strategies:
        return spec.fee_resolution
    return StrategySpec.balanced().fee_resolution


# --------------------------------------------------------------------------
# finite-universe subset sampling


def subset_count(universe_size: int, n: int) -> int:
    return math.comb(universe_size, n)


def draw_subsets(universe_size: int, n: int, runs: int, seed: int) -> list:
    """Independent uniform ``n``-subsets of ``range(universe_size)``, one per run."""
    if not 1 <= n <= universe_size:
        raise ConfigurationError(f"need 1 <= n <= N, got n={n}, N={universe_size}")
    if runs < 1:
        raise ConfigurationError(f"runs must be >= 1, got {runs}")
    draws = []
    for r in range(runs):
        rng = make_rng(seed, SUBSET_STREAM, r)
        picked = rng.choice(universe_size, size=n, replace=False)
        draws.append(SubsetDraw(r, tuple(sorted(int(i) for i in picked))))
    return draws


def _subset_chunk(task):
    prices, grid, draws, strategies, fee, alloc, averaging = task
    batch_prices = np.stack([prices[:, list(d.indices)] for d in draws])
    offset = draws[0].run
    return [
        _per_run(run_batch(batch_prices, spec, alloc, fee, grid=grid, run_offset=offset), averaging)
        for spec in strategies
    ]


def subset_experiment(
    market: Market,
    n: int,
    runs: int,
    strategies: Sequence[StrategySpec] | None = None,
    fee: FeeModel | None = None,
    alloc: InitialAllocation | None = None,
    *,
    seed: int = 0,
    averaging: Averaging = Averaging.GROWTH,
    workers: int = 1,
) -> dict:
    """Average strategy growth over random ``n``-asset portfolios from a fixed market."""
    strategies = tuple(strategies or default_strategies())
    fee = fee or FeeModel()
    alloc = alloc or GivenWealth()
    averaging = Averaging(averaging)
    draws = draw_subsets(market.n_assets, n, runs, seed)
    tasks = [
        (market.prices, market.grid, draws[a:b], strategies, fee, alloc, averaging)
        for a, b in _chunks(runs)
    ]
    parts = _map(_subset_chunk, tasks, workers)
    return {
        spec: _aggregate(market.grid, np.concatenate([p[s] for p in parts]), averaging)
        for s, spec in enumerate(strategies)
    }


def simulate_universe(config: ExperimentConfig) -> Market:
    """The fixed ``N``-asset market used by the simulated subset protocol."""
    if config.universe_size is None:
        raise ConfigurationError("universe_size must be set for the subset protocol")
    return simulate_market(config.universe_size, config.model, config.grid, config.master_seed)


def subset_simulation(config: ExperimentConfig) -> dict:
    universe = simulate_universe(config)
    return subset_experiment(
        universe,
        config.n_assets,
        config.mcs_runs,
        config.strategies,
        config.fee,
        config.alloc,
        seed=config.master_seed,
        averaging=config.averaging,
        workers=config.workers,
    )
