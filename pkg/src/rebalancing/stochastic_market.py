"""Brownian and geometric Brownian price paths on a uniform time grid.

Random streams come from numpy's ``PCG64`` bit generator seeded through a
``SeedSequence``. A path's stream is keyed by the root seed plus a spawn key
(``(asset,)`` for a single market, ``(run, asset)`` inside experiments), so a
path never depends on which other paths were generated before it. Normal
draws use ``Generator.standard_normal`` (numpy's ziggurat sampler) scaled by
``sqrt(dt)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigurationError, ParseError

Seed = Union[int, Sequence[int]]

GRID_TOLERANCE = 1e-9
RNG_DESCRIPTION = "numpy PCG64 via SeedSequence(entropy=seed, spawn_key=(run, asset)); standard_normal (ziggurat)"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k * dt`` for ``k = 0..steps``."""

    dt: float
    steps: int

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive and finite, got {self.dt!r}")
        if self.steps < 1:
            raise ConfigurationError(f"grid needs at least one step, got {self.steps}")

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1, dtype=np.float64) * self.dt


def build_time_grid(horizon: float, dt: float) -> TimeGrid:
    """Grid over ``[0, horizon]`` with spacing ``dt``.

    ``horizon / dt`` must be an integer to within a relative tolerance of
    1e-9, otherwise the last grid point would silently miss the horizon.
    """
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ConfigurationError(f"horizon T must be positive, got T={horizon!r}")
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigurationError(f"dt must be positive, got dt={dt!r}")
    if dt > horizon:
        raise ConfigurationError(f"dt={dt!r} exceeds horizon T={horizon!r}")
    ratio = horizon / dt
    steps = round(ratio)
    if abs(ratio - steps) > GRID_TOLERANCE * ratio:
        raise ConfigurationError(
            f"T/dt must be an integer: T={horizon!r}, dt={dt!r} gives {ratio!r}"
        )
    return TimeGrid(dt=float(dt), steps=int(steps))


@dataclass(frozen=True)
class BrownianPath:
    grid: TimeGrid
    values: np.ndarray


@dataclass(frozen=True)
class GbmParams:
    drift: float
    volatility: float
    s0: float = 1.0

    def __post_init__(self):
        if not self.s0 > 0:
            raise ConfigurationError(f"initial price s0 must be positive, got {self.s0!r}")
        if not self.volatility >= 0:
            raise ConfigurationError(f"volatility must be non-negative, got {self.volatility!r}")


@dataclass(frozen=True)
class PricePath:
    grid: TimeGrid
    prices: np.ndarray


@dataclass(frozen=True, eq=False)
class Market:
    """``N`` price paths sharing one grid.

    ``prices`` has shape ``(steps + 1, N)``; column ``i`` belongs to
    ``labels[i]``.
    """

    grid: TimeGrid
    prices: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=np.float64)
        if prices.ndim != 2 or prices.shape[1] < 1:
            raise ConfigurationError("market prices must be a (steps + 1, N) array with N >= 1")
        if prices.shape[0] != self.grid.steps + 1:
            raise ConfigurationError(
                f"market has {prices.shape[0]} rows but grid has {self.grid.steps + 1} points"
            )
        if not np.all(prices > 0) or not np.all(np.isfinite(prices)):
            raise ConfigurationError("market prices must be finite and strictly positive")
        labels = tuple(self.labels) or tuple(f"asset_{i}" for i in range(prices.shape[1]))
        if len(labels) != prices.shape[1]:
            raise ConfigurationError(f"{len(labels)} labels for {prices.shape[1]} assets")
        if len(set(labels)) != len(labels):
            raise ConfigurationError("asset labels must be unique")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "labels", labels)

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]

    @property
    def assets(self) -> list[PricePath]:
        return [PricePath(self.grid, self.prices[:, i]) for i in range(self.n_assets)]

    def subset(self, indices) -> "Market":
        indices = list(indices)
        return Market(self.grid, self.prices[:, indices], tuple(self.labels[i] for i in indices))

    def __eq__(self, other):
        if not isinstance(other, Market):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.labels == other.labels
            and np.array_equal(self.prices, other.prices)
        )


def seed_sequence(seed: Seed, *key: int) -> np.random.SeedSequence:
    """SeedSequence for ``seed`` extended by ``key``.

    A tuple seed ``(root, a, b)`` is the root entropy followed by a spawn key,
    so ``seed_sequence((s, r), i)`` and ``seed_sequence(s, r, i)`` agree.
    """
    if isinstance(seed, (int, np.integer)):
        root, prefix = int(seed), ()
    else:
        seed = tuple(int(s) for s in seed)
        if not seed:
            raise ConfigurationError("empty seed")
        root, prefix = seed[0], seed[1:]
    if root < 0:
        raise ConfigurationError(f"seed must be non-negative, got {root}")
    return np.random.SeedSequence(root, spawn_key=tuple(prefix) + tuple(int(k) for k in key))


def make_rng(seed: Seed, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))


def sample_brownian_path(grid: TimeGrid, seed: Seed) -> BrownianPath:
    """Brownian motion sampled at the grid points, starting at exactly 0."""
    rng = make_rng(seed)
    increments = rng.standard_normal(grid.steps) * math.sqrt(grid.dt)
    values = np.empty(grid.steps + 1)
    values[0] = 0.0
    np.cumsum(increments, out=values[1:])
    return BrownianPath(grid, values)


def gbm_path(params: GbmParams, brownian: BrownianPath) -> PricePath:
    """Exact GBM solution evaluated on the Brownian samples."""
    times = brownian.grid.times
    drift = params.drift - 0.5 * params.volatility**2
    prices = params.s0 * np.exp(drift * times + params.volatility * brownian.values)
    return PricePath(brownian.grid, prices)


def simulate_market(n_assets: int, params: GbmParams, grid: TimeGrid, seed: Seed) -> Market:
    """``n_assets`` independent GBM paths; path ``i`` depends only on ``(seed, i)``."""
    if n_assets < 1:
        raise ConfigurationError(f"a market needs at least one asset, got n_assets={n_assets}")
    if isinstance(seed, (int, np.integer)):
        seed = (int(seed),)
    columns = [
        gbm_path(params, sample_brownian_path(grid, tuple(seed) + (i,))).prices
        for i in range(n_assets)
    ]
    return Market(grid, np.column_stack(columns))


def write_market_csv(market: Market, target) -> None:
    """Write ``t,<label_0>,...`` rows with 17 significant digits.

    ``target`` is a path or a text stream.
    """
    if isinstance(target, io.TextIOBase) or hasattr(target, "write"):
        _write_market(market, target)
    else:
        with open(target, "w", newline="") as fh:
            _write_market(market, fh)


def _write_market(market, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", *market.labels])
    for t, row in zip(market.grid.times, market.prices):
        writer.writerow([format_float(t), *(format_float(p) for p in row)])


def read_market_csv(source) -> Market:
    """Inverse of :func:`write_market_csv`; the grid is rebuilt from ``t``."""
    if hasattr(source, "read"):
        text, name = source.read(), getattr(source, "name", "<stream>")
    else:
        name = str(source)
        with open(source, newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError("empty market file", source=name)
    header = rows[0]
    if len(header) < 2 or header[0] != "t":
        raise ParseError("header must be 't,<asset>,...'", source=name, line=1)
    body = rows[1:]
    if len(body) < 2:
        raise ParseError("market file needs at least two grid points", source=name)
    try:
        data = np.array([[float(x) for x in row] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"non-numeric value ({exc})", source=name) from None
    if data.shape[1] != len(header):
        raise ParseError("ragged rows", source=name)
    grid = TimeGrid(dt=float(data[1, 0]), steps=len(body) - 1)
    if not np.array_equal(data[:, 0], grid.times):
        raise ParseError("t column is not a uniform grid starting at 0", source=name)
    return Market(grid, data[:, 1:], tuple(header[1:]))


def format_float(x) -> str:
    return format(float(x), ".17g")
