"""Cardinality-constrained index tracking: pre-selection, weighting, backtests."""

__version__ = "0.1.0"

from .backtest import (
    BacktestConfig,
    CellResult,
    PeriodResult,
    enhanced_return,
    run_backtest,
    transaction_volume,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateDesignError,
    IndexTrackError,
    LadDegeneracyError,
    NumericalError,
    UndefinedRatioError,
)
from .market_data import (
    MembershipCalendar,
    PricePanel,
    WindowSchedule,
    annualized_volatility,
    eligible_universe,
    load_membership,
    load_price_panel,
    log_return,
    save_membership,
    save_price_panel,
    window_schedule,
)
from .preselect import (
    SelectionConfig,
    SelectionMatrix,
    backward_eliminate,
    build_target,
    forward_select,
    lambda_daily_from_annual,
)
from .regression import (
    RegressionFit,
    RegressionProblem,
    lad_fit,
    ols_fit,
    standardize,
)
from .weights import ObjectiveConfig, Portfolio, optimize_weights, penalty, tracking_error

__all__ = [name for name in dir() if not name.startswith("_")]
