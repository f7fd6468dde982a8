"""Rolling backtest: universe filtering, selection, weighting, evaluation.

Each period selects on the in-sample window, holds the optimized weights
fixed through the out-of-sample window (buy-and-hold), and records
tracking errors, transaction volume against the previous period, and the
out-of-sample return series.  Cell failures are captured per
(period, cardinality) and the run continues.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, IndexTrackError
from .market_data import (
    TRADING_DAYS_PER_YEAR,
    MembershipCalendar,
    PricePanel,
    eligible_universe,
    observation_price_rows,
    resolve_period,
    window_schedule,
)
from .preselect import SelectionConfig, build_target, lambda_daily_from_annual, select
from .weights import (
    ObjectiveConfig,
    Portfolio,
    _window_arrays,
    annualize_te,
    optimize_weights,
    portfolio_log_returns,
    tracking_error_raw,
)

logger = logging.getLogger(__name__)

INITIAL_TRANSACTION_VOLUME = 1.0  # period 1: full investment from cash


@dataclass(frozen=True)
class BacktestConfig:
    selection: SelectionConfig = SelectionConfig()
    objective: ObjectiveConfig = ObjectiveConfig()
    n_in: object = "3y"
    n_out: object = "1y"
    cardinalities: tuple = (5, 10, 20, 30, 50, 70, 100)
    lambda_annual: float = 0.0

    def __post_init__(self):
        cards = tuple(int(c) for c in self.cardinalities)
        if not cards:
            raise ConfigError("need at least one cardinality")
        if any(c < 1 for c in cards):
            raise ConfigError(f"cardinalities must be >= 1, got {cards}")
        if max(cards) > self.selection.n_max:
            raise ConfigError(
                f"cardinality {max(cards)} exceeds n_max {self.selection.n_max}"
            )
        object.__setattr__(self, "cardinalities", cards)

    @property
    def lambda_daily(self) -> float:
        return lambda_daily_from_annual(self.lambda_annual)


@dataclass
class CellResult:
    cardinality: int
    in_sample_te: float = np.nan     # % p.a.
    out_sample_te: float = np.nan    # % p.a.
    transaction_volume: float = np.nan
    portfolio: Portfolio = None
    out_sample_returns: np.ndarray = None
    enhanced_return_value: float = np.nan
    carried_prices: int = 0
    error: str = ""


@dataclass
class PeriodResult:
    K: int
    in_range: tuple
    out_range: tuple
    rebalance_date: object
    universe_size: int
    out_index_volatility: float
    out_year: int
    cells: dict = field(default_factory=dict)  # cardinality -> CellResult


def transaction_volume(previous: Portfolio, nxt: Portfolio) -> float:
    """Sum of absolute weight changes over the union of both asset sets."""
    assets = set(previous.weights) | set(nxt.weights)
    return float(sum(abs(nxt.weight(a) - previous.weight(a)) for a in assets))


def enhanced_return(out_sample_returns, index_returns) -> float:
    """Annualized mean daily log-return difference, in % p.a."""
    port = np.asarray(out_sample_returns, dtype=float)
    idx = np.asarray(index_returns, dtype=float)
    if port.shape != idx.shape:
        raise ConfigError(
            f"length mismatch: {port.shape} portfolio vs {idx.shape} index returns"
        )
    return 100.0 * TRADING_DAYS_PER_YEAR * float(port.mean() - idx.mean())


def run_backtest(panel: PricePanel, members: MembershipCalendar,
                 config: BacktestConfig) -> list:
    """Execute the rolling backtest, returning one PeriodResult per window."""
    n_in = resolve_period(config.n_in)
    n_out = resolve_period(config.n_out)
    schedule = window_schedule(panel.n_observations, n_in, n_out)
    lam = config.lambda_daily
    all_index_returns = panel.index_log_returns()
    asset_returns = panel.asset_log_returns()

    results = []
    prev_portfolios: dict = {}
    for K, in_range, out_range in schedule.windows:
        in_rows = observation_price_rows(in_range)
        rebalance_date = panel.dates[in_rows[1]]
        universe = eligible_universe(panel, members, in_range)
        out_index = all_index_returns[out_range[0] - 1:out_range[1]]
        period = PeriodResult(
            K=K,
            in_range=in_range,
            out_range=out_range,
            rebalance_date=rebalance_date,
            universe_size=len(universe),
            out_index_volatility=(100.0 * np.sqrt(TRADING_DAYS_PER_YEAR)
                                  * float(np.std(out_index, ddof=1))),
            out_year=int(str(panel.dates[observation_price_rows(out_range)[1]])[:4]),
        )
        results.append(period)
        if not universe:
            for card in config.cardinalities:
                period.cells[card] = CellResult(card, error="empty universe")
            continue

        cols = [panel.asset_column(a) for a in universe]
        in_returns = asset_returns[in_range[0] - 1:in_range[1]][:, cols]
        target = build_target(all_index_returns[in_range[0] - 1:in_range[1]], lam)
        n_max = min(config.selection.n_max, len(universe))
        sel_config = SelectionConfig(
            direction=config.selection.direction,
            loss=config.selection.loss,
            intercept=config.selection.intercept,
            n_max=n_max,
            lambda_daily=lam,
        )
        try:
            selection = select(in_returns, target, sel_config, assets=universe)
        except IndexTrackError as exc:
            logger.error("period %d selection failed: %s", K, exc)
            for card in config.cardinalities:
                period.cells[card] = CellResult(card, error=f"selection: {exc}")
            continue

        for card in config.cardinalities:
            cell = CellResult(card)
            period.cells[card] = cell
            if card > selection.n_max:
                cell.error = f"cardinality {card} exceeds universe size {len(universe)}"
                continue
            try:
                chosen = selection.selected(card)
                warm = prev_portfolios.get(card)
                portfolio = optimize_weights(
                    chosen, panel, in_range, config.objective, warm_start=warm,
                    rebalance_date=rebalance_date,
                )
                cell.portfolio = portfolio
                in_prices, x, in_target, _ = _window_arrays(
                    portfolio, panel, in_range, lam, carry_forward=False
                )
                cell.in_sample_te = annualize_te(tracking_error_raw(in_prices, x, in_target))
                out_prices, x, out_target, carried = _window_arrays(
                    portfolio, panel, out_range, lam, carry_forward=True
                )
                cell.carried_prices = carried
                cell.out_sample_returns = portfolio_log_returns(out_prices, x)
                cell.out_sample_te = annualize_te(
                    tracking_error_raw(out_prices, x, out_target)
                )
                cell.enhanced_return_value = enhanced_return(
                    cell.out_sample_returns, out_index
                )
            except IndexTrackError as exc:
                logger.error("period %d cardinality %d failed: %s", K, card, exc)
                cell.error = str(exc)

        # transaction volumes couple consecutive periods; sequential pass
        for card in config.cardinalities:
            cell = period.cells[card]
            if cell.portfolio is None:
                continue
            prev = prev_portfolios.get(card)
            if prev is None:
                cell.transaction_volume = INITIAL_TRANSACTION_VOLUME
            else:
                cell.transaction_volume = transaction_volume(prev, cell.portfolio)
            prev_portfolios[card] = cell.portfolio
    return results


def completeness(results) -> tuple:
    """(cells attempted, cells succeeded) over a run."""
    attempted = sum(len(p.cells) for p in results)
    succeeded = sum(1 for p in results for c in p.cells.values() if not c.error)
    return attempted, succeeded


def results_frame(results, config: BacktestConfig) -> pd.DataFrame:
    """Flatten PeriodResults to one row per (K, cardinality)."""
    n_out = resolve_period(config.n_out)
    rebalances_per_year = TRADING_DAYS_PER_YEAR / n_out
    rows = []
    for period in results:
        for card in sorted(period.cells):
            cell = period.cells[card]
            rows.append(
                {
                    "K": period.K,
                    "cardinality": card,
                    "universe_size": period.universe_size,
                    "rebalance_date": str(period.rebalance_date),
                    "out_year": period.out_year,
                    "out_index_volatility": period.out_index_volatility,
                    "in_sample_te": cell.in_sample_te,
                    "out_sample_te": cell.out_sample_te,
                    "transaction_volume": cell.transaction_volume,
                    "transaction_volume_pa": (
                        cell.transaction_volume * rebalances_per_year
                        if np.isfinite(cell.transaction_volume) else np.nan
                    ),
                    "enhanced_return": cell.enhanced_return_value,
                    "carried_prices": cell.carried_prices,
                    "error": cell.error,
                }
            )
    return pd.DataFrame(rows)
