"""Wealth and fraction algebra, trade valuation and proportional fees.

Every function accepts either plain ``(n,)`` vectors or arrays with leading
batch dimensions ``(..., n)``. Sums over assets are accumulated left to right
so a row gives the same bits whether it is evaluated alone or inside a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError

FRACTION_TOLERANCE = 1e-12


def asset_sum(values: np.ndarray) -> np.ndarray:
    """Sum over the last axis in a fixed left-to-right order."""
    values = np.asarray(values, dtype=np.float64)
    total = values[..., 0].copy()
    for i in range(1, values.shape[-1]):
        total += values[..., i]
    return total


def _pair(prices, quantities):
    prices = np.asarray(prices, dtype=np.float64)
    quantities = np.asarray(quantities, dtype=np.float64)
    if prices.shape[-1:] != quantities.shape[-1:] or prices.ndim == 0:
        raise DimensionError(
            f"prices and quantities differ in length: {prices.shape} vs {quantities.shape}"
        )
    if prices.shape[-1] < 1:
        raise DimensionError("need at least one asset")
    return prices, quantities


@dataclass(frozen=True, eq=False)
class FractionVector:
    """Non-negative weights summing to one."""

    fractions: np.ndarray

    def __post_init__(self):
        f = np.array(self.fractions, dtype=np.float64)
        if f.ndim != 1 or f.size < 1:
            raise ConfigurationError("fractions must be a non-empty vector")
        if np.any(f < 0) or np.any(f > 1) or not np.all(np.isfinite(f)):
            raise ConfigurationError(f"fractions must lie in [0, 1], got {f.tolist()}")
        if abs(float(asset_sum(f)) - 1.0) > FRACTION_TOLERANCE:
            raise ConfigurationError(f"fractions must sum to 1, got {float(asset_sum(f))!r}")
        f.setflags(write=False)
        object.__setattr__(self, "fractions", f)

    @classmethod
    def equal(cls, n: int) -> "FractionVector":
        return cls(np.full(n, 1.0 / n))

    def __len__(self):
        return self.fractions.size

    def __eq__(self, other):
        if not isinstance(other, FractionVector):
            return NotImplemented
        return np.array_equal(self.fractions, other.fractions)

    def __hash__(self):
        return hash(self.fractions.tobytes())


@dataclass(frozen=True)
class FeeModel:
    """Proportional fee ``alpha`` charged on the absolute traded value."""

    alpha: float = 0.0
    charge_initial_purchase: bool = False

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise ConfigurationError(f"fee rate alpha must be in [0, 1), got {self.alpha!r}")


@dataclass(frozen=True, eq=False)
class TradeReport:
    """Trade values (positive = asset sold) and the fee they incur."""

    trade_values: np.ndarray
    total_fee: np.ndarray | float
    # Amount actually removed from wealth; differs from total_fee for partial rebalancing.
    wealth_deduction: np.ndarray | float = None

    def __post_init__(self):
        if self.wealth_deduction is None:
            object.__setattr__(self, "wealth_deduction", self.total_fee)


def wealth(prices, quantities):
    prices, quantities = _pair(prices, quantities)
    return asset_sum(prices * quantities)


def fractions(prices, quantities) -> FractionVector:
    """Wealth shares ``S_i q_i / W`` of a single portfolio."""
    prices, quantities = _pair(prices, quantities)
    if prices.ndim != 1 or quantities.ndim != 1:
        raise DimensionError("fractions() takes a single portfolio; use fraction_matrix for batches")
    return FractionVector(fraction_matrix(prices, quantities))


def fraction_matrix(prices, quantities) -> np.ndarray:
    prices, quantities = _pair(prices, quantities)
    values = prices * quantities
    total = asset_sum(values)
    if np.any(~(total > 0)):
        raise DomainError(f"wealth must be positive to compute fractions, got {total!r}")
    return values / total[..., None]


def wealth_components(prices, q_temp) -> np.ndarray:
    prices, q_temp = _pair(prices, q_temp)
    return prices * q_temp


def trade_values(prices, q_temp, q_new) -> np.ndarray:
    """``S_i (q_temp_i - q_new_i)``; positive entries are sales."""
    prices, q_temp = _pair(prices, q_temp)
    _, q_new = _pair(prices, q_new)
    if q_temp.shape != q_new.shape:
        raise DimensionError(f"q_temp and q_new differ in shape: {q_temp.shape} vs {q_new.shape}")
    return prices * (q_temp - q_new)


def total_fee(trades, fee: FeeModel | float):
    alpha = fee.alpha if isinstance(fee, FeeModel) else float(fee)
    return alpha * asset_sum(np.abs(np.asarray(trades, dtype=np.float64)))
