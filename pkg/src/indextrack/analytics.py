"""Evaluation analytics: return-risk ratios, power-law fits, ranks, overlaps.

Ratios are computed from the running sums of daily excess returns:
S1 = sum(y), S2 = sum(y^2), S1+ = sum of gains (y > 0), S1- = -sum of
losses (y <= 0), S2- = sum of squared losses.  Annualization uses 252
trading days and percent units throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats as scipy_stats

from .errors import ConfigError, DataError, UndefinedRatioError
from .market_data import TRADING_DAYS_PER_YEAR
from .regression import RegressionProblem, ols_fit


def daily_risk_free(annual_rate_percent: float) -> float:
    """Daily rate compounding to the annual percent rate over 252 days."""
    if annual_rate_percent <= -100:
        raise DataError(f"annual rate must exceed -100%, got {annual_rate_percent}")
    return (1.0 + 0.01 * annual_rate_percent) ** (1.0 / TRADING_DAYS_PER_YEAR) - 1.0


def align_risk_free(dates, rate_dates, annual_rates_percent) -> np.ndarray:
    """Per-date daily risk-free rates, carrying the last observed rate forward."""
    dates = np.asarray(dates, dtype="datetime64[D]")
    rate_dates = np.asarray(rate_dates, dtype="datetime64[D]")
    annual = np.asarray(annual_rates_percent, dtype=float)
    order = np.argsort(rate_dates)
    rate_dates, annual = rate_dates[order], annual[order]
    idx = np.searchsorted(rate_dates, dates, side="right") - 1
    if np.any(idx < 0):
        raise DataError("risk-free series starts after the requested dates")
    return np.array([daily_risk_free(annual[i]) for i in idx])


def excess_returns(returns, daily_rf) -> np.ndarray:
    returns = np.asarray(returns, dtype=float)
    daily_rf = np.broadcast_to(np.asarray(daily_rf, dtype=float), returns.shape)
    return returns - daily_rf


def _sums(excess):
    y = np.asarray(excess, dtype=float)
    if y.size < 2:
        raise DataError("ratios need at least 2 observations")
    gains = y[y > 0]
    losses = y[y <= 0]
    return {
        "T": y.size,
        "S1": float(y.sum()),
        "S2": float((y ** 2).sum()),
        "S1p": float(gains.sum()),
        "S1m": float(-losses.sum()),
        "S2m": float((losses ** 2).sum()),
    }


def sharpe(excess) -> float:
    """Annualized mean excess return over annualized standard deviation."""
    s = _sums(excess)
    var = (s["S2"] - s["S1"] ** 2 / s["T"]) / s["T"]
    if var <= 0:
        raise UndefinedRatioError("zero variance in excess returns")
    mean = 100.0 * TRADING_DAYS_PER_YEAR * s["S1"] / s["T"]
    sd = 100.0 * math.sqrt(TRADING_DAYS_PER_YEAR * var)
    return mean / sd


def gain_loss(excess) -> float:
    """Sum of gains over the absolute sum of losses."""
    s = _sums(excess)
    if s["S1m"] == 0:
        raise UndefinedRatioError("no losses: gain-loss ratio undefined")
    return s["S1p"] / s["S1m"]


def sortino(excess) -> float:
    """Annualized mean excess return over annualized downside deviation."""
    s = _sums(excess)
    if s["S2m"] == 0:
        raise UndefinedRatioError("no losses: sortino ratio undefined")
    mean = 100.0 * TRADING_DAYS_PER_YEAR * s["S1"] / s["T"]
    sd_down = 100.0 * math.sqrt(TRADING_DAYS_PER_YEAR * s["S2m"] / s["T"])
    return mean / sd_down


@dataclass(frozen=True)
class PowerLawFit:
    """ln(TE) = alpha0 + alpha1 ln(n) + procedure dummies.

    Anti-log reading: TE ~ theta / n^omega with theta = exp(alpha0),
    omega = -alpha1.
    """

    alpha0: float
    alpha1: float
    dummy_coefficients: dict
    adjusted_r2: float
    p_values: dict

    @property
    def theta(self) -> float:
        return math.exp(self.alpha0)

    @property
    def omega(self) -> float:
        return -self.alpha1


def fit_power_law(te_records, base_procedure=None) -> PowerLawFit:
    """Regress ln(TE) on ln(cardinality) with dummies for non-base procedures.

    ``te_records`` is an iterable of (procedure tag, cardinality, TE).
    """
    records = [(str(p), int(n), float(te)) for p, n, te in te_records]
    if not records:
        raise ConfigError("no tracking-error records")
    if any(te <= 0 for _, _, te in records):
        raise DataError("tracking errors must be positive for the log-log fit")
    if len({n for _, n, _ in records}) < 2:
        raise ConfigError("need at least 2 distinct cardinalities")
    procedures = sorted({p for p, _, _ in records})
    if base_procedure is None:
        base_procedure = procedures[0]
    if base_procedure not in procedures:
        raise ConfigError(f"base procedure {base_procedure!r} not present")
    others = [p for p in procedures if p != base_procedure]

    log_n = np.array([math.log(n) for _, n, _ in records])
    dummies = np.array([[1.0 if p == q else 0.0 for q in others] for p, _, _ in records])
    design = np.column_stack([log_n, dummies]) if others else log_n[:, None]
    response = np.array([math.log(te) for _, _, te in records])
    fit = ols_fit(RegressionProblem(design, response, intercept=True))

    m = len(records)
    k = design.shape[1] + 1
    dof = m - k
    p_values = {}

    def pval(t):
        if t is None or dof <= 0:
            return math.nan
        return float(2.0 * scipy_stats.t.sf(abs(t), dof))

    # intercept t-value is not stored in the fit; recompute for its p-value
    X = np.column_stack([np.ones(m), design])
    sigma2 = fit.sum_sq_residuals / dof if dof > 0 else math.nan
    se = np.sqrt(np.diag(sigma2 * np.linalg.inv(X.T @ X))) if dof > 0 else None
    params = np.concatenate([[fit.intercept_value], fit.coefficients])
    if se is not None:
        t_all = params / se
        p_values["alpha0"] = pval(t_all[0])
        p_values["alpha1"] = pval(t_all[1])
        for j, proc in enumerate(others):
            p_values[proc] = pval(t_all[2 + j])
    else:
        p_values = {"alpha0": math.nan, "alpha1": math.nan, **{p: math.nan for p in others}}

    return PowerLawFit(
        alpha0=float(fit.intercept_value),
        alpha1=float(fit.coefficients[0]),
        dummy_coefficients={p: float(c) for p, c in zip(others, fit.coefficients[1:])},
        adjusted_r2=fit.adjusted_r2,
        p_values=p_values,
    )


def average_rank(values, ascending: bool = True) -> np.ndarray:
    """Mean rank per row of a (procedure x cardinality) value matrix.

    Per column, ranks run 1..P (ties share their average rank); ascending
    means lower values rank better.
    """
    matrix = np.asarray(values, dtype=float)
    if matrix.ndim != 2:
        raise ConfigError("average_rank needs a 2-D matrix")
    if np.isnan(matrix).any():
        r, c = np.argwhere(np.isnan(matrix))[0]
        raise DataError(f"missing cell at procedure {r}, cardinality column {c}")
    data = matrix if ascending else -matrix
    ranks = np.column_stack(
        [scipy_stats.rankdata(data[:, j], method="average") for j in range(data.shape[1])]
    )
    return ranks.mean(axis=1)


def overlap_percent(selection_a, selection_b) -> float:
    """Percentage of assets common to two equal-cardinality selections."""
    a, b = set(selection_a), set(selection_b)
    if len(a) != len(b):
        raise ConfigError(f"cardinality mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ConfigError("empty selections")
    return 100.0 * len(a & b) / len(a)


def te_volatility_correlation(out_tes, vols) -> float:
    """Pearson correlation between per-year TEs and index volatilities."""
    x = np.asarray(out_tes, dtype=float)
    y = np.asarray(vols, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ConfigError("need >= 3 paired years")
    if np.std(x) == 0 or np.std(y) == 0:
        raise DataError("degenerate variance in correlation input")
    return float(np.corrcoef(x, y)[0, 1])
