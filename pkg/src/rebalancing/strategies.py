"""Quantity-update rules for the five rebalancing strategies.

All strategies reduce to one kernel parameterised by a rebalance period ``m``
and a partial coefficient ``D``:

* passive            never trades
* balanced           m = 1, D = 1
* periodic           m >= 1, D = 1
* partial            m = 1, D in [0, 1]
* periodic_partial   m >= 1, D in [0, 1]

The kernel branches on ``D == 0`` and ``D == 1`` so that the reductions to
the passive and fully balanced rules hold bit for bit, not just
algebraically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import BankruptcyError, ConfigurationError, DimensionError, NumericalError
from .portfolio_core import (
    FeeModel,
    FractionVector,
    TradeReport,
    asset_sum,
    fraction_matrix,
)
from .stochastic_market import Market, TimeGrid


class StrategyKind(str, enum.Enum):
    PASSIVE = "passive"
    BALANCED = "balanced"
    PERIODIC = "periodic"
    PARTIAL = "partial"
    PERIODIC_PARTIAL = "periodic_partial"


@dataclass(frozen=True)
class SinglePass:
    """Fee taken from the trades that would rebalance with no fee at all."""

    def describe(self) -> str:
        return "single"


@dataclass(frozen=True)
class FixedPoint:
    """Iterate the fee until it is consistent with the trades it pays for.

    Convergence is declared when successive fee estimates differ by less
    than ``tolerance`` times the pre-trade wealth.
    """

    tolerance: float = 1e-10
    max_iterations: int = 100

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigurationError(f"fixed-point tolerance must be positive, got {self.tolerance!r}")
        if self.max_iterations < 1:
            raise ConfigurationError("fixed-point max_iterations must be >= 1")

    def describe(self) -> str:
        return f"fixedpoint(tolerance={self.tolerance!r}, max_iterations={self.max_iterations})"


FeeResolution = Union[SinglePass, FixedPoint]


@dataclass(frozen=True)
class StrategySpec:
    kind: StrategyKind
    period: int = 1
    partial: float = 1.0
    fee_resolution: FeeResolution = field(default_factory=SinglePass)

    def __post_init__(self):
        kind = StrategyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if isinstance(self.period, bool) or int(self.period) != self.period:
            raise ConfigurationError(f"rebalance period m must be an integer, got {self.period!r}")
        if self.period < 1:
            raise ConfigurationError(f"rebalance period m must be >= 1, got {self.period}")
        if not (0.0 <= self.partial <= 1.0):
            raise ConfigurationError(f"partial coefficient D must be in [0, 1], got {self.partial!r}")
        # Unused parameters are normalised so equal strategies compare equal.
        if kind in (StrategyKind.PASSIVE, StrategyKind.BALANCED, StrategyKind.PARTIAL):
            object.__setattr__(self, "period", 1)
        else:
            object.__setattr__(self, "period", int(self.period))
        if kind in (StrategyKind.PASSIVE, StrategyKind.BALANCED, StrategyKind.PERIODIC):
            object.__setattr__(self, "partial", 1.0)
        else:
            object.__setattr__(self, "partial", float(self.partial))

    @classmethod
    def passive(cls, **kw):
        return cls(StrategyKind.PASSIVE, **kw)

    @classmethod
    def balanced(cls, **kw):
        return cls(StrategyKind.BALANCED, **kw)

    @classmethod
    def periodic(cls, m, **kw):
        return cls(StrategyKind.PERIODIC, period=m, **kw)

    @classmethod
    def partial_balanced(cls, D, **kw):
        return cls(StrategyKind.PARTIAL, partial=D, **kw)

    @classmethod
    def periodic_partial(cls, m, D, **kw):
        return cls(StrategyKind.PERIODIC_PARTIAL, period=m, partial=D, **kw)

    @property
    def rebalances(self) -> bool:
        return self.kind is not StrategyKind.PASSIVE

    @property
    def label(self) -> str:
        if self.kind is StrategyKind.PERIODIC:
            return f"periodic_m{self.period}"
        if self.kind is StrategyKind.PARTIAL:
            return f"partial_D{self.partial:g}"
        if self.kind is StrategyKind.PERIODIC_PARTIAL:
            return f"periodic_partial_m{self.period}_D{self.partial:g}"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class GivenQuantities:
    quantities: np.ndarray


@dataclass(frozen=True)
class GivenWealth:
    wealth: float = 1.0
    targets: FractionVector | None = None  # None means equal weights

    def __post_init__(self):
        if not self.wealth > 0:
            raise ConfigurationError(f"initial wealth must be positive, got {self.wealth!r}")


InitialAllocation = Union[GivenQuantities, GivenWealth]


@dataclass(frozen=True, eq=False)
class PortfolioState:
    quantities: np.ndarray
    step: int
    wealth: float
    cumulative_fees: float = 0.0


@dataclass(frozen=True, eq=False)
class WealthTrajectory:
    """Wealth and fee ledger of one run.

    ``fees_paid[k]`` is the amount removed from wealth at step ``k``;
    ``fees_nominal[k]`` is ``alpha`` times the traded value that the fee
    formula was evaluated on. They differ only for partial rebalancing.
    """

    grid: TimeGrid
    wealth: np.ndarray
    fees_paid: np.ndarray
    fees_nominal: np.ndarray
    quantities_final: np.ndarray
    targets: np.ndarray

    @property
    def cumulative_fees(self) -> float:
        return _sequential_total(self.fees_paid)


@dataclass(frozen=True, eq=False)
class BatchTrajectories:
    """Trajectories of ``R`` runs stacked row-wise."""

    grid: TimeGrid
    wealth: np.ndarray  # (R, K + 1)
    fees_paid: np.ndarray  # (R, K + 1)
    fees_nominal: np.ndarray  # (R, K + 1)
    quantities_final: np.ndarray  # (R, n)
    targets: np.ndarray  # (R, n)

    def __len__(self):
        return self.wealth.shape[0]

    def trajectory(self, r: int) -> WealthTrajectory:
        return WealthTrajectory(
            self.grid,
            self.wealth[r].copy(),
            self.fees_paid[r].copy(),
            self.fees_nominal[r].copy(),
            self.quantities_final[r].copy(),
            self.targets[r].copy(),
        )


def _sequential_total(values) -> float:
    total = 0.0
    for v in np.asarray(values, dtype=np.float64).ravel():
        total += float(v)
    return total


# --------------------------------------------------------------------------
# kernel


def rebalance(q_temp, prices, targets, alpha, D, resolution=SinglePass(), *, step=None, run_offset=0):
    """Trade a fraction ``D`` of the way towards ``targets``.

    Works on ``(n,)`` or ``(R, n)`` arrays. Returns ``(q_new, report)``.
    """
    q_temp = np.asarray(q_temp, dtype=np.float64)
    prices = np.asarray(prices, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    held = prices * q_temp
    w_temp = asset_sum(held)
    if D == 0.0:
        zero = np.zeros_like(w_temp)
        return q_temp.copy(), TradeReport(np.zeros_like(held), zero, zero.copy())

    def fee_for(fee_estimate):
        gap = targets * (w_temp - fee_estimate)[..., None] - held
        trades = D * (-gap) if D != 1.0 else -gap
        return alpha * asset_sum(np.abs(trades)), trades

    fee, trades = fee_for(np.zeros_like(w_temp))
    if isinstance(resolution, FixedPoint) and alpha != 0.0:
        fee, trades = _fixed_point(fee_for, fee, trades, w_temp, resolution, step, run_offset)

    if D == 1.0:
        q_new = targets * (w_temp - fee)[..., None] / prices
        deduction = fee
    else:
        q_new = (held + D * (targets * w_temp[..., None] - held - targets * fee[..., None])) / prices
        deduction = D * fee

    bankrupt = ~(w_temp - deduction > 0)
    if np.any(bankrupt):
        row = int(np.flatnonzero(np.atleast_1d(bankrupt))[0])
        raise BankruptcyError(
            "fees exhaust the portfolio wealth",
            step=step,
            run=run_offset + row if q_temp.ndim > 1 else None,
        )
    return q_new, TradeReport(trades, fee, deduction)


def _fixed_point(fee_for, fee, trades, w_temp, resolution, step, run_offset):
    fee = np.array(fee, dtype=np.float64)
    trades = np.array(trades, dtype=np.float64)
    active = np.ones(fee.shape, dtype=bool)
    for _ in range(resolution.max_iterations):
        new_fee, new_trades = fee_for(fee)
        change = np.abs(new_fee - fee)
        # Converged rows are frozen so each row's result is independent of its batch.
        fee = np.where(active, new_fee, fee)
        trades = np.where(active[..., None], new_trades, trades)
        active = active & ~(change < resolution.tolerance * w_temp)
        if not np.any(active):
            return fee, trades
    row = int(np.flatnonzero(np.atleast_1d(active))[0])
    raise NumericalError(
        f"fee fixed point did not converge in {resolution.max_iterations} iterations",
        step=step,
        run=run_offset + row if fee.ndim else None,
    )


# --------------------------------------------------------------------------
# single-step API


def initial_state(prices0, alloc: InitialAllocation, fee: FeeModel | None = None):
    """Allocate at ``t = 0``. Returns ``(state, targets, initial_fee)``."""
    fee = fee or FeeModel()
    prices0 = np.asarray(prices0, dtype=np.float64)
    q, targets, paid = _allocate(prices0, alloc, fee)
    w = asset_sum(prices0 * q)
    if not np.all(w > 0):
        raise ConfigurationError(f"initial wealth must be positive, got {w!r}")
    state = PortfolioState(q, 0, float(w), float(paid))
    return state, FractionVector(targets), float(paid)


def _allocate(prices0, alloc, fee):
    """Vectorised allocation over ``(..., n)`` initial prices."""
    if np.any(~(prices0 > 0)):
        raise ConfigurationError("initial prices must be positive")
    n = prices0.shape[-1]
    if isinstance(alloc, GivenWealth):
        targets = alloc.targets.fractions if alloc.targets is not None else FractionVector.equal(n).fractions
        if targets.size != n:
            raise DimensionError(f"{targets.size} target fractions for {n} assets")
        paid = fee.alpha * alloc.wealth if fee.charge_initial_purchase else 0.0
        budget = alloc.wealth - paid
        q = targets * budget / prices0
        return q, np.broadcast_to(targets, prices0.shape).copy(), np.full(prices0.shape[:-1], paid)
    if isinstance(alloc, GivenQuantities):
        q = np.asarray(alloc.quantities, dtype=np.float64)
        if q.shape[-1] != n:
            raise DimensionError(f"{q.shape[-1]} initial quantities for {n} assets")
        if np.any(q < 0):
            raise ConfigurationError("initial quantities must be non-negative")
        if np.any(~(asset_sum(prices0 * q) > 0)):
            raise ConfigurationError("initial quantities give non-positive wealth")
        targets = fraction_matrix(prices0, q)
        paid = np.zeros(prices0.shape[:-1])
        if fee.charge_initial_purchase:
            paid = fee.alpha * asset_sum(prices0 * q)
            q = q * (1.0 - fee.alpha)
        return np.broadcast_to(q, prices0.shape).copy(), targets, paid
    raise ConfigurationError(f"unknown allocation {alloc!r}")


def _advance(state, prices, q_new, report):
    prices = np.asarray(prices, dtype=np.float64)
    fee = float(report.wealth_deduction)
    return PortfolioState(
        q_new,
        state.step + 1,
        float(asset_sum(prices * q_new)),
        state.cumulative_fees + fee,
    )


def _targets(targets):
    return targets.fractions if isinstance(targets, FractionVector) else np.asarray(targets, dtype=np.float64)


def step_passive(state: PortfolioState, prices) -> PortfolioState:
    q = np.array(state.quantities, dtype=np.float64)
    if q.shape != np.shape(prices):
        raise DimensionError("prices and quantities differ in length")
    return PortfolioState(q, state.step + 1, float(asset_sum(np.asarray(prices, dtype=np.float64) * q)), state.cumulative_fees)


def step_partial(state, prices, targets, fee: FeeModel, D: float, resolution=SinglePass()):
    if not 0.0 <= D <= 1.0:
        raise ConfigurationError(f"partial coefficient D must be in [0, 1], got {D!r}")
    q_new, report = rebalance(
        state.quantities, prices, _targets(targets), fee.alpha, float(D), resolution, step=state.step + 1
    )
    return _advance(state, prices, q_new, report), report


def step_balanced(state, prices, targets, fee: FeeModel, resolution=SinglePass()):
    return step_partial(state, prices, targets, fee, 1.0, resolution)


def step_combined(state, prices, targets, fee: FeeModel, m: int, D: float, k: int | None = None, resolution=SinglePass()):
    k = state.step + 1 if k is None else k
    if k < 1:
        raise ConfigurationError(f"step index must be >= 1, got {k}")
    if m < 1:
        raise ConfigurationError(f"rebalance period m must be >= 1, got {m}")
    if k % m == 0:
        return step_partial(state, prices, targets, fee, D, resolution)
    n = len(state.quantities)
    return step_passive(state, prices), TradeReport(np.zeros(n), 0.0, 0.0)


def step_periodic(state, prices, targets, fee: FeeModel, m: int, k: int | None = None, resolution=SinglePass()):
    return step_combined(state, prices, targets, fee, m, 1.0, k, resolution)


# --------------------------------------------------------------------------
# runs


def run_batch(prices, spec: StrategySpec, alloc: InitialAllocation | None = None, fee: FeeModel | None = None, *, grid: TimeGrid | None = None, run_offset: int = 0) -> BatchTrajectories:
    """Run ``spec`` on ``R`` markets given as a ``(R, K + 1, n)`` price array.

    Each row evolves independently; a row's output is bit-identical to
    running it alone.
    """
    fee = fee or FeeModel()
    alloc = alloc or GivenWealth()
    prices = np.asarray(prices, dtype=np.float64)
    if prices.ndim != 3:
        raise DimensionError(f"batch prices must be (runs, steps + 1, assets), got {prices.shape}")
    runs, points, n = prices.shape
    grid = grid or TimeGrid(dt=1.0, steps=points - 1)
    if grid.steps + 1 != points:
        raise DimensionError(f"grid has {grid.steps + 1} points, prices have {points}")

    q, targets, paid = _allocate(prices[:, 0, :], alloc, fee)
    wealth = np.empty((runs, points))
    fees_paid = np.zeros((runs, points))
    fees_nominal = np.zeros((runs, points))
    wealth[:, 0] = asset_sum(prices[:, 0, :] * q)
    fees_paid[:, 0] = paid
    fees_nominal[:, 0] = paid
    if np.any(~(wealth[:, 0] > 0)):
        raise ConfigurationError("initial wealth must be positive")

    m, D = spec.period, spec.partial
    for k in range(1, points):
        s = prices[:, k, :]
        if spec.rebalances and k % m == 0:
            q, report = rebalance(q, s, targets, fee.alpha, D, spec.fee_resolution, step=k, run_offset=run_offset)
            fees_paid[:, k] = report.wealth_deduction
            fees_nominal[:, k] = report.total_fee
        wealth[:, k] = asset_sum(s * q)
    return BatchTrajectories(grid, wealth, fees_paid, fees_nominal, q, targets)


def run_strategy(market: Market, spec: StrategySpec, alloc: InitialAllocation | None = None, fee: FeeModel | None = None) -> WealthTrajectory:
    batch = run_batch(market.prices[None, :, :], spec, alloc, fee, grid=market.grid)
    return batch.trajectory(0)
