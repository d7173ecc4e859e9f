import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rebalancing.errors import ConfigurationError, DomainError
from rebalancing.metrics import (
    GrowthSeries,
    average_series,
    growth_at,
    growth_rows,
    growth_series,
    summarize_wealth,
)
from rebalancing.stochastic_market import GbmParams, TimeGrid, build_time_grid, sample_brownian_path, simulate_market
from rebalancing.strategies import StrategySpec, WealthTrajectory, run_strategy

GRID = TimeGrid(0.5, 4)


def trajectory(wealth, grid=GRID):
    wealth = np.asarray(wealth, dtype=float)
    zeros = np.zeros_like(wealth)
    return WealthTrajectory(grid, wealth, zeros, zeros, np.ones(1), np.ones(1))


def test_growth_at_examples():
    assert growth_at(3.0, 3.0, 7.0) == 0.0
    assert growth_at(math.e**2 * 5, 5.0, 2.0) == pytest.approx(1.0, rel=1e-15)
    assert growth_at(2.0, 1.0, 4.0) == pytest.approx(0.173286795, abs=1e-9)


@pytest.mark.parametrize("args", [(1.0, 1.0, 0.0), (0.0, 1.0, 1.0), (1.0, -1.0, 1.0)])
def test_growth_at_domain(args):
    with pytest.raises(DomainError):
        growth_at(*args)


def test_growth_series_constant_wealth():
    s = growth_series(trajectory([2.0] * 5))
    assert s.growth.tolist() == [0.0] * 4
    assert s.times.tolist() == [0.5, 1.0, 1.5, 2.0]


def test_growth_series_exponential():
    c = 0.37
    s = growth_series(trajectory(3.0 * np.exp(c * GRID.times)))
    assert s.growth == pytest.approx(np.full(4, c), rel=1e-13)


def test_growth_series_passive_gbm():
    # Substituting the GBM solution: g(t) = (mu - sigma^2/2) + sigma B(t) / t.
    mu, sigma = 0.2, 0.4
    grid = build_time_grid(3, 0.1)
    market = simulate_market(1, GbmParams(mu, sigma), grid, 77)
    b = sample_brownian_path(grid, (77, 0)).values
    g = growth_series(run_strategy(market, StrategySpec.passive())).growth
    expected = (mu - sigma**2 / 2) + sigma * b[1:] / grid.times[1:]
    assert g == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_growth_series_rejects_nonpositive():
    with pytest.raises(DomainError):
        growth_rows(np.array([[1.0, 0.0, 1.0, 1.0, 1.0]]), GRID)


@settings(deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_growth_invariant_to_initial_wealth(c, seed):
    w = np.exp(np.cumsum(np.random.default_rng(seed).normal(0, 0.1, 5)))
    a = growth_series(trajectory(w)).growth
    b = growth_series(trajectory(c * w)).growth
    assert b == pytest.approx(a, rel=1e-12, abs=1e-12)


def test_average_single_is_identity():
    s = GrowthSeries(GRID, [0.1, 0.2, 0.3, 0.4])
    assert average_series([s]) == s


def test_average_symmetric_pair_is_zero():
    x = np.array([0.1, -0.2, 0.3, 0.4])
    avg = average_series([GrowthSeries(GRID, x), GrowthSeries(GRID, -x)])
    assert avg.growth.tolist() == [0.0] * 4
    assert avg.run_count == 2


def test_average_copies():
    s = GrowthSeries(GRID, [0.1, 0.2, 0.3, 0.4])
    avg = average_series([s] * 7)
    assert avg.growth == pytest.approx(s.growth, rel=1e-15)
    assert avg.run_count == 7


def test_average_weights_by_run_count():
    a = GrowthSeries(GRID, np.full(4, 1.0), run_count=3)
    b = GrowthSeries(GRID, np.full(4, 0.0), run_count=1)
    assert average_series([a, b]).growth.tolist() == [0.75] * 4


@given(st.permutations(range(5)))
def test_average_permutation_invariant(order):
    rng = np.random.default_rng(1)
    series = [GrowthSeries(GRID, rng.normal(size=4)) for _ in range(5)]
    base = average_series(series)
    shuffled = average_series([series[i] for i in order])
    assert shuffled.growth == pytest.approx(base.growth, rel=1e-14, abs=1e-15)


def test_average_errors():
    with pytest.raises(ConfigurationError):
        average_series([])
    with pytest.raises(ConfigurationError):
        average_series([GrowthSeries(GRID, np.zeros(4)), GrowthSeries(TimeGrid(0.25, 4), np.zeros(4))])


def test_wealth_averaging_orders_differently():
    # Mean of growth vs growth of mean wealth: Jensen's inequality orders them.
    w = np.array([[1.0, 2.0, 4.0, 8.0, 16.0], [1.0, 0.5, 0.25, 0.125, 0.0625]])
    by_growth = growth_rows(w, GRID).mean(axis=0)
    by_wealth = summarize_wealth(GRID, w).growth
    assert np.all(by_wealth >= by_growth)
    assert by_wealth[-1] == pytest.approx(math.log((16 + 0.0625) / 2) / 2.0)


def test_growth_series_validation():
    with pytest.raises(DomainError):
        GrowthSeries(GRID, [0.0, 1.0])
    with pytest.raises(DomainError):
        GrowthSeries(GRID, [0.0, np.inf, 0.0, 0.0])
