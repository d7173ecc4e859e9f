import math
from collections import Counter
from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest

from rebalancing.errors import BankruptcyError, ConfigurationError
from rebalancing.experiments import (
    ExperimentConfig,
    compare_strategies,
    default_strategies,
    draw_subsets,
    simulate_universe,
    subset_count,
    subset_experiment,
    subset_simulation,
    sweep_heatmap,
    sweep_partial_coefficient,
    sweep_rebalance_period,
)
from rebalancing.metrics import Averaging, growth_series
from rebalancing.portfolio_core import FeeModel, FractionVector
from rebalancing.stochastic_market import GbmParams, build_time_grid, simulate_market
from rebalancing.strategies import GivenWealth, StrategySpec, run_strategy


def small_config(**kw):
    base = dict(
        grid=build_time_grid(5, 0.1),
        model=GbmParams(0.125, 0.5),
        n_assets=2,
        mcs_runs=60,
        fee=FeeModel(0.01),
        master_seed=11,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        small_config(mcs_runs=0)
    with pytest.raises(ConfigurationError):
        small_config(n_assets=5, universe_size=3)


def test_compare_single_asset_no_fee_all_equal():
    cfg = small_config(n_assets=1, mcs_runs=1, fee=FeeModel(0.0))
    results = compare_strategies(cfg)
    series = list(results.values())
    for s in series[1:]:
        assert s.growth == pytest.approx(series[0].growth, rel=1e-12, abs=1e-14)


def test_compare_deterministic():
    cfg = small_config()
    a, b = compare_strategies(cfg), compare_strategies(cfg)
    assert a == b


def test_compare_matches_direct_evaluation():
    # Run r uses market seed (master_seed, r); recompute two runs by hand.
    cfg = small_config(mcs_runs=2)
    results = compare_strategies(cfg)
    spec = StrategySpec.partial_balanced(0.5)
    rows = []
    for r in range(2):
        market = simulate_market(2, cfg.model, cfg.grid, (cfg.master_seed, r))
        rows.append(growth_series(run_strategy(market, spec, GivenWealth(), cfg.fee)).growth)
    assert np.array_equal(results[spec].growth, np.mean(rows, axis=0))
    assert results[spec].run_count == 2


def test_compare_parallel_bit_identical():
    cfg = small_config(mcs_runs=120)
    serial = compare_strategies(cfg)
    parallel = compare_strategies(replace(cfg, workers=2))
    assert serial == parallel


def test_compare_bankruptcy_aborts():
    # Lopsided targets with coarse steps let one price jump push the fee past wealth.
    cfg = small_config(
        grid=build_time_grid(20, 1.0),
        model=GbmParams(0.0, 3.0),
        fee=FeeModel(0.99),
        strategies=(StrategySpec.balanced(),),
        alloc=GivenWealth(1.0, FractionVector((0.01, 0.99))),
    )
    with pytest.raises(BankruptcyError) as info:
        compare_strategies(cfg)
    assert info.value.run is not None


def test_wealth_averaging_mode():
    cfg = small_config(averaging=Averaging.WEALTH)
    results = compare_strategies(cfg)
    growth = compare_strategies(small_config())
    for spec in results:
        # Growth of mean wealth dominates mean growth (Jensen).
        assert np.all(results[spec].growth >= growth[spec].growth - 1e-12)


def test_std_err_shrinks_with_runs():
    base = small_config(mcs_runs=200, strategies=(StrategySpec.passive(),))
    small = compare_strategies(base)[StrategySpec.passive()].final_std_err
    large = compare_strategies(replace(base, mcs_runs=800))[StrategySpec.passive()].final_std_err
    assert large / small == pytest.approx(0.5, rel=0.2)


# --------------------------------------------------------------------------
# sweeps


def test_period_sweep_reductions():
    cfg = small_config(mcs_runs=40)
    K = cfg.grid.steps
    result = sweep_rebalance_period(cfg, [1, 3, K + 1], [0.0, 0.02])
    assert result.final_growth.shape == (3, 2)
    ref = compare_strategies(replace(cfg, strategies=(StrategySpec.balanced(), StrategySpec.passive())))
    for j, alpha in enumerate((0.0, 0.02)):
        ref = compare_strategies(
            replace(cfg, fee=FeeModel(alpha), strategies=(StrategySpec.balanced(), StrategySpec.passive()))
        )
        assert result.final_growth[0, j] == ref[StrategySpec.balanced()].final
        assert result.final_growth[2, j] == ref[StrategySpec.passive()].final
    assert np.all(result.std_err >= 0)


def test_partial_sweep_zero_column_is_passive():
    cfg = small_config(mcs_runs=40)
    result = sweep_partial_coefficient(cfg, [0.0, 0.5, 1.0], [0.0, 0.01, 0.05])
    passive = compare_strategies(replace(cfg, strategies=(StrategySpec.passive(),)))[StrategySpec.passive()].final
    assert np.all(result.row(0.0) == passive)


def test_heatmap_reductions():
    cfg = small_config(mcs_runs=40)
    result = sweep_heatmap(cfg, [1, 2, 5], [0.0, 0.5, 1.0])
    ref = compare_strategies(replace(cfg, strategies=(StrategySpec.passive(), StrategySpec.balanced())))
    assert np.all(result.column(0.0) == ref[StrategySpec.passive()].final)
    assert result.cell(1, 1.0)[0] == ref[StrategySpec.balanced()].final


def test_sweeps_use_common_random_numbers():
    # Cells with equivalent strategies see identical markets, so they agree exactly.
    cfg = small_config(mcs_runs=30)
    a = sweep_heatmap(cfg, [2], [1.0])
    b = sweep_rebalance_period(cfg, [2], [cfg.fee.alpha])
    assert a.final_growth[0, 0] == b.final_growth[0, 0]
    assert a.std_err[0, 0] == b.std_err[0, 0]


def test_sweep_parallel_identical():
    cfg = small_config(mcs_runs=110)
    assert sweep_heatmap(cfg, [1, 4], [0.2, 0.9]) == sweep_heatmap(replace(cfg, workers=3), [1, 4], [0.2, 0.9])


def test_sweep_rejects_bad_values():
    cfg = small_config()
    with pytest.raises(ConfigurationError):
        sweep_partial_coefficient(cfg, [1.5], [0.0])
    with pytest.raises(ConfigurationError):
        sweep_rebalance_period(cfg, [1], [1.0])
    with pytest.raises(ConfigurationError):
        sweep_heatmap(cfg, [], [0.5])


# --------------------------------------------------------------------------
# subset sampling


def test_subset_counts():
    assert subset_count(20, 2) == 190
    assert subset_count(20, 8) == 125970
    # Enumeration oracle for the smaller case.
    assert len(list(combinations(range(20), 2))) == 190


def test_full_draw_is_forced():
    assert all(d.indices == (0, 1, 2, 3, 4) for d in draw_subsets(5, 5, 20, 1))


def test_draws_sorted_distinct_deterministic():
    draws = draw_subsets(20, 8, 50, 3)
    assert draws == draw_subsets(20, 8, 50, 3)
    for d in draws:
        assert list(d.indices) == sorted(set(d.indices))
        assert all(0 <= i < 20 for i in d.indices)


def test_draw_rejects_oversized():
    with pytest.raises(ConfigurationError):
        draw_subsets(20, 21, 1, 0)


def test_draw_uniformity():
    m = 100_000
    counts = Counter(d.indices for d in draw_subsets(5, 2, m, 9))
    assert len(counts) == 10
    se = math.sqrt(0.1 * 0.9 / m)
    for c in counts.values():
        assert abs(c / m - 0.1) < 3 * se


def test_subset_full_universe_matches_compare():
    cfg = small_config(mcs_runs=1, n_assets=3, universe_size=3)
    market = simulate_market(3, cfg.model, cfg.grid, (cfg.master_seed, 0))
    a = subset_experiment(market, 3, 1, cfg.strategies, cfg.fee, seed=5)
    b = compare_strategies(cfg)
    for spec in cfg.strategies:
        assert np.array_equal(a[spec].growth, b[spec].growth)


def test_subset_deterministic_and_parallel():
    cfg = small_config(n_assets=3, universe_size=6, mcs_runs=70)
    a = subset_simulation(cfg)
    assert a == subset_simulation(cfg)
    assert a == subset_simulation(replace(cfg, workers=2))


def test_subset_universe_needs_size():
    with pytest.raises(ConfigurationError):
        simulate_universe(small_config())


def test_default_strategies_are_five_distinct():
    specs = default_strategies()
    assert len(set(specs)) == 5
