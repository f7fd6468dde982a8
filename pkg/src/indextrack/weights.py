"""Nonnegative, sum-to-one weight optimization for tracking portfolios.

The objective is squared RMS tracking error plus a penalty on the squared
mean deviation (weight 5 by default).  The simplex constraint is handled
by optimizing auxiliary variables z_i >= 1e-8 and normalizing x = z/sum(z)
inside the objective; a bound-constrained limited-memory quasi-Newton
routine (L-BFGS-B) minimizes it.  Portfolio returns follow the basket
convention: r_t = ln(sum_i x_i P_it / sum_i x_i P_i,t-1) with x fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, DataError
from .market_data import TRADING_DAYS_PER_YEAR, PricePanel, observation_price_rows

logger = logging.getLogger(__name__)

_Z_LOWER = 1e-8
_WEIGHT_FLOOR = 1e-6


@dataclass(frozen=True)
class Portfolio:
    """Strictly positive weights summing to one over the selected assets."""

    weights: dict
    rebalance_date: object = None
    converged: bool = True
    objective: float = math.nan

    def __post_init__(self):
        weights = dict(self.weights)
        if not weights:
            raise ConfigError("portfolio needs at least one asset")
        total = sum(weights.values())
        if abs(total - 1.0) > 1e-10:
            raise ConfigError(f"weights sum to {total}, not 1")
        if any(w <= 0 for w in weights.values()):
            raise ConfigError("portfolio weights must be strictly positive")
        object.__setattr__(self, "weights", weights)

    def weight(self, asset) -> float:
        return self.weights.get(asset, 0.0)

    @property
    def assets(self) -> list:
        return list(self.weights)


@dataclass(frozen=True)
class ObjectiveConfig:
    penalty_weight: float = 5.0
    lambda_daily: float = 0.0
    tolerance: float = 1e-10
    gradient_tolerance: float = 1e-8
    max_iterations: int = 0  # 0 -> 10 * (selection size + 50)

    def __post_init__(self):
        if self.penalty_weight < 0:
            raise ConfigError("penalty_weight must be >= 0")


def portfolio_log_returns(prices: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """ln of consecutive basket-value ratios for fixed weights.

    ``prices`` is (T+1 x n); returns T values.
    """
    values = prices @ weights
    if np.any(values <= 0):
        raise DataError("non-positive basket value")
    return np.diff(np.log(values))


def deviations(prices: np.ndarray, weights: np.ndarray, target: np.ndarray) -> np.ndarray:
    return np.asarray(target, dtype=float) - portfolio_log_returns(prices, weights)


def tracking_error_raw(prices, weights, target) -> float:
    """Root mean square deviation between target and portfolio returns."""
    d = deviations(prices, weights, target)
    return float(np.sqrt(np.mean(d ** 2)))


def annualize_te(te_raw: float) -> float:
    return 100.0 * math.sqrt(TRADING_DAYS_PER_YEAR) * te_raw


def penalty_raw(prices, weights, target) -> float:
    """Squared mean deviation; zero iff total returns match over the window."""
    d = deviations(prices, weights, target)
    return float(np.mean(d) ** 2)


def _window_arrays(portfolio: Portfolio, panel: PricePanel, obs_range, lambda_daily,
                   carry_forward: bool = False):
    row_lo, row_hi = observation_price_rows(obs_range)
    if row_lo < 0 or row_hi >= panel.n_dates:
        raise ConfigError(f"observation range {obs_range} outside panel")
    cols = [panel.asset_column(a) for a in portfolio.assets]
    prices = panel.prices[row_lo:row_hi + 1][:, cols].copy()
    carried = int(np.isnan(prices).sum())
    if carried:
        if not carry_forward:
            r, c = np.argwhere(np.isnan(prices))[0]
            raise DataError(
                f"missing price for {portfolio.assets[c]!r} at "
                f"{panel.dates[row_lo + r]} inside evaluation range"
            )
        for j in range(prices.shape[1]):
            col = prices[:, j]
            if np.isnan(col[0]):
                raise DataError(
                    f"no price for {portfolio.assets[j]!r} at the start of the range"
                )
            while np.isnan(col).any():
                idx = np.flatnonzero(np.isnan(col))
                col[idx] = col[idx - 1]
    target = panel.index_log_returns()[obs_range[0] - 1:obs_range[1]] + lambda_daily
    x = np.array([portfolio.weights[a] for a in portfolio.assets])
    return prices, x, target, carried


def tracking_error(portfolio: Portfolio, panel: PricePanel, obs_range,
                   lambda_daily: float = 0.0, carry_forward: bool = False) -> float:
    """Annualized percent tracking error of the portfolio over the range."""
    prices, x, target, _ = _window_arrays(portfolio, panel, obs_range, lambda_daily,
                                          carry_forward)
    return annualize_te(tracking_error_raw(prices, x, target))


def penalty(portfolio: Portfolio, panel: PricePanel, obs_range,
            lambda_daily: float = 0.0, carry_forward: bool = False) -> float:
    prices, x, target, _ = _window_arrays(portfolio, panel, obs_range, lambda_daily,
                                          carry_forward)
    return penalty_raw(prices, x, target)


def objective_value(prices, weights, target, penalty_weight: float) -> float:
    d = deviations(prices, weights, target)
    return float(np.mean(d ** 2) + penalty_weight * np.mean(d) ** 2)


def objective_and_gradient(z: np.ndarray, prices: np.ndarray, target: np.ndarray,
                           penalty_weight: float):
    """Objective and its gradient in the unnormalized z parameterization.

    The basket return is invariant to the scale of z, so the objective can
    be evaluated on z directly; the gradient follows by the chain rule
    through r_t = ln(V_t) - ln(V_{t-1}) with V_t = sum_i z_i P_it.
    """
    values = prices @ z
    r = np.diff(np.log(values))
    d = target - r
    m = d.size
    mean_d = d.mean()
    f = float(np.mean(d ** 2) + penalty_weight * mean_d ** 2)
    df_dr = -(2.0 * d / m + 2.0 * penalty_weight * mean_d / m)
    scaled = prices / values[:, None]
    grad = df_dr @ (scaled[1:] - scaled[:-1])
    return f, grad


def _optimize_from(z0, prices, target, config: ObjectiveConfig, max_iter: int):
    result = minimize(
        objective_and_gradient,
        z0,
        args=(prices, target, config.penalty_weight),
        method="L-BFGS-B",
        jac=True,
        bounds=[(_Z_LOWER, None)] * len(z0),
        options={
            "maxiter": max_iter,
            "ftol": config.tolerance,
            "gtol": config.gradient_tolerance,
        },
    )
    return result


def optimize_weights(selection, panel: PricePanel, in_range,
                     config: ObjectiveConfig = ObjectiveConfig(),
                     warm_start: Portfolio = None,
                     rebalance_date=None) -> Portfolio:
    """Minimize TE^2 + penalty_weight * Penalty over the weight simplex.

    Starts from uniform weights and, when given, from the warm start
    restricted to the selection; the better optimum wins.  Weights below
    1e-6 are floored at 1e-8 and renormalized so strict positivity holds.
    """
    selection = list(selection)
    if not selection:
        raise ConfigError("empty selection")
    row_lo, row_hi = observation_price_rows(in_range)
    if rebalance_date is None:
        rebalance_date = panel.dates[min(row_hi, panel.n_dates - 1)]
    if len(selection) == 1:
        return Portfolio({selection[0]: 1.0}, rebalance_date=rebalance_date, objective=0.0)

    cols = [panel.asset_column(a) for a in selection]
    prices = panel.prices[row_lo:row_hi + 1][:, cols]
    if np.isnan(prices).any():
        missing = np.argwhere(np.isnan(prices))
        r, c = missing[0]
        raise DataError(
            f"missing in-sample price for {selection[c]!r} at {panel.dates[row_lo + r]}"
        )
    m = prices.shape[0] - 1
    if m < len(selection) + 1:
        logger.warning(
            "only %d observations for %d assets: under-determined fit", m, len(selection)
        )
    if len(selection) <= 30:
        for j in range(len(selection)):
            for k in range(j + 1, len(selection)):
                if np.allclose(prices[:, j], prices[:, k]):
                    logger.warning(
                        "duplicated price series: %s and %s", selection[j], selection[k]
                    )

    target = panel.index_log_returns()[in_range[0] - 1:in_range[1]] + config.lambda_daily
    max_iter = config.max_iterations or 10 * (len(selection) + 50)

    starts = [np.full(len(selection), 1.0 / len(selection))]
    if warm_start is not None:
        prev = np.array([warm_start.weight(a) for a in selection])
        if prev.sum() > 0:
            prev = np.maximum(prev / prev.sum(), _Z_LOWER)
            starts.append(prev)

    best = None
    for z0 in starts:
        result = _optimize_from(z0, prices, target, config, max_iter)
        if best is None or result.fun < best.fun:
            best = result
    z = np.maximum(best.x, _Z_LOWER)
    x = z / z.sum()
    x = np.where(x < _WEIGHT_FLOOR, _Z_LOWER, x)
    x = x / x.sum()
    converged = bool(best.success) or best.status == 0
    if not converged:
        logger.warning("weight optimization did not converge: %s", best.message)
    return Portfolio(
        weights=dict(zip(selection, x.tolist())),
        rebalance_date=rebalance_date,
        converged=converged,
        objective=objective_value(prices, x, target, config.penalty_weight),
    )
