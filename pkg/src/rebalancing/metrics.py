"""Growth of wealth, ``g(t) = log(W(t) / W(0)) / t``, and run averaging."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, DomainError
from .stochastic_market import TimeGrid


class Averaging(str, enum.Enum):
    """How per-run results are combined.

    ``GROWTH`` averages the per-run growth values (default). ``WEALTH``
    averages the normalised wealth ``W(t)/W(0)`` first and takes the growth
    of that mean.
    """

    GROWTH = "growth"
    WEALTH = "wealth"


@dataclass(frozen=True, eq=False)
class GrowthSeries:
    """Growth at ``t_1..t_K``; ``t = 0`` is excluded.

    ``std_err`` holds the pointwise standard error of the mean when the
    series was averaged from individual runs, else ``None``.
    """

    grid: TimeGrid
    growth: np.ndarray
    run_count: int = 1
    std_err: np.ndarray | None = None

    def __post_init__(self):
        growth = np.asarray(self.growth, dtype=np.float64)
        if growth.shape != (self.grid.steps,):
            raise DomainError(f"growth series needs {self.grid.steps} points, got {growth.shape}")
        if not np.all(np.isfinite(growth)):
            raise DomainError("growth series contains non-finite values")
        object.__setattr__(self, "growth", growth)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[1:]

    @property
    def final(self) -> float:
        return float(self.growth[-1])

    @property
    def final_std_err(self) -> float:
        return float("nan") if self.std_err is None else float(self.std_err[-1])

    def __eq__(self, other):
        if not isinstance(other, GrowthSeries):
            return NotImplemented
        same_err = (self.std_err is None and other.std_err is None) or (
            self.std_err is not None
            and other.std_err is not None
            and np.array_equal(self.std_err, other.std_err)
        )
        return (
            self.grid == other.grid
            and self.run_count == other.run_count
            and np.array_equal(self.growth, other.growth)
            and same_err
        )


def growth_at(wealth_t: float, wealth_0: float, t: float) -> float:
    if t == 0:
        raise DomainError("growth is undefined at t = 0")
    if not (wealth_t > 0 and wealth_0 > 0):
        raise DomainError(f"growth needs positive wealth, got W(t)={wealth_t!r}, W(0)={wealth_0!r}")
    return math.log(wealth_t / wealth_0) / t


def growth_rows(wealth: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Growth for a ``(R, K + 1)`` wealth matrix, computed one row at a time.

    Row-wise evaluation keeps ``log`` on identical array shapes no matter how
    runs are batched.
    """
    wealth = np.atleast_2d(np.asarray(wealth, dtype=np.float64))
    times = grid.times[1:]
    out = np.empty((wealth.shape[0], grid.steps))
    for r, row in enumerate(wealth):
        if not np.all(row > 0):
            k = int(np.flatnonzero(~(row > 0))[0])
            raise DomainError(f"non-positive wealth at step {k} (row {r})")
        out[r] = np.log(row[1:] / row[0]) / times
    return out


def growth_series(trajectory) -> GrowthSeries:
    """Growth series of a single :class:`WealthTrajectory`."""
    return GrowthSeries(trajectory.grid, growth_rows(trajectory.wealth, trajectory.grid)[0], 1)


def run_stats(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and standard error of the mean, summed run by run.

    The fixed summation order makes a statistic identical whether it is taken
    over a full series or over one column of it.
    """
    rows = np.asarray(rows, dtype=np.float64)
    count = rows.shape[0]
    if count == 0:
        raise ConfigurationError("cannot average an empty collection of runs")
    total = np.zeros(rows.shape[1:])
    for row in rows:
        total = total + row
    mean = total / count
    if count == 1:
        return mean, np.zeros_like(mean)
    sq = np.zeros_like(mean)
    for row in rows:
        sq = sq + (row - mean) ** 2
    return mean, np.sqrt(sq / (count - 1)) / math.sqrt(count)


def summarize_runs(grid: TimeGrid, rows: np.ndarray) -> GrowthSeries:
    """Mean and standard error over the rows of a ``(R, K)`` growth matrix."""
    rows = np.asarray(rows, dtype=np.float64)
    mean, err = run_stats(rows)
    return GrowthSeries(grid, mean, rows.shape[0], err)


def summarize_wealth(grid: TimeGrid, wealth: np.ndarray) -> GrowthSeries:
    """Growth of the mean normalised wealth across runs.

    The standard error is a delta-method approximation,
    ``se(mean ratio) / (mean ratio * t)``.
    """
    wealth = np.asarray(wealth, dtype=np.float64)
    if wealth.shape[0] == 0:
        raise ConfigurationError("cannot average an empty collection of runs")
    mean, ratio_err = run_stats(wealth[:, 1:] / wealth[:, :1])
    times = grid.times[1:]
    return GrowthSeries(grid, np.log(mean) / times, wealth.shape[0], ratio_err / mean / times)


def average_series(series: Iterable[GrowthSeries]) -> GrowthSeries:
    """Pointwise mean of growth series, weighted by their run counts.

    For single-run inputs this is the plain arithmetic mean, and the result
    carries a standard error computed from their spread.
    """
    series = list(series)
    if not series:
        raise ConfigurationError("cannot average an empty collection of series")
    grid = series[0].grid
    for s in series[1:]:
        if s.grid != grid:
            raise ConfigurationError("cannot average growth series on different grids")
    if len(series) == 1:
        return series[0]
    if all(s.run_count == 1 for s in series):
        return summarize_runs(grid, np.stack([s.growth for s in series]))
    weights = np.array([s.run_count for s in series], dtype=np.float64)
    total = int(weights.sum())
    mean = sum(w * s.growth for w, s in zip(weights, series)) / total
    return GrowthSeries(grid, mean, total)
