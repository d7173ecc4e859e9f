"""Seeded simulation of portfolio rebalancing strategies under proportional fees."""

__version__ = "0.1.0"

from .errors import (
    BankruptcyError,
    ConfigurationError,
    DimensionError,
    DomainError,
    NumericalError,
    ParseError,
    RebalancingError,
)
from .experiments import (
    ExperimentConfig,
    SubsetDraw,
    SweepResult,
    compare_strategies,
    draw_subsets,
    subset_count,
    subset_experiment,
    sweep_heatmap,
    sweep_partial_coefficient,
    sweep_rebalance_period,
)
from .metrics import Averaging, GrowthSeries, average_series, growth_at, growth_series
from .portfolio_core import FeeModel, FractionVector, TradeReport
from .stochastic_market import (
    GbmParams,
    Market,
    TimeGrid,
    build_time_grid,
    gbm_path,
    sample_brownian_path,
    simulate_market,
)
from .strategies import (
    FixedPoint,
    GivenQuantities,
    GivenWealth,
    SinglePass,
    StrategyKind,
    StrategySpec,
    WealthTrajectory,
    run_strategy,
)
