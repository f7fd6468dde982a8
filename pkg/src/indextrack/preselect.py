"""Stepwise asset pre-selection: forward selection and backward elimination.

Both directions populate a binary selection matrix with one row per
cardinality 1..n_max.  Forward selection is nested upward (an asset chosen
at cardinality k stays chosen for all larger k); backward elimination is
nested downward.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, IndexTrackError
from .market_data import TRADING_DAYS_PER_YEAR
from .regression import RegressionProblem, lad_fit, ols_fit, standardize

logger = logging.getLogger(__name__)

_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SelectionConfig:
    direction: str = "backward"  # forward | backward
    loss: str = "ols"            # ols | lad
    intercept: bool = False
    n_max: int = 100
    lambda_daily: float = 0.0

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ConfigError(f"direction must be forward or backward, got {self.direction!r}")
        if self.loss not in ("ols", "lad"):
            raise ConfigError(f"loss must be ols or lad, got {self.loss!r}")
        if self.n_max < 1:
            raise ConfigError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def tag(self) -> str:
        """Short procedure name, e.g. BE-OLS(n) or FS-LAD(c)."""
        d = "FS" if self.direction == "forward" else "BE"
        return f"{d}-{self.loss.upper()}({'c' if self.intercept else 'n'})"


@dataclass(frozen=True)
class SelectionMatrix:
    """Binary (n_max x M) membership matrix plus the add/remove ordering."""

    delta: np.ndarray
    assets: tuple
    ordering: tuple  # FS: assets in order added; BE: assets in order removed
    direction: str

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=np.int8)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "ordering", tuple(self.ordering))
        for n in range(delta.shape[0]):
            if int(delta[n].sum()) != n + 1:
                raise IndexTrackError(f"selection row for cardinality {n + 1} has wrong count")
        delta.setflags(write=False)

    @property
    def n_max(self) -> int:
        return self.delta.shape[0]

    def selected(self, cardinality: int) -> list:
        """Asset ids in the cardinality-n portfolio, in panel order."""
        if not 1 <= cardinality <= self.n_max:
            raise ConfigError(f"cardinality {cardinality} outside 1..{self.n_max}")
        row = self.delta[cardinality - 1]
        return [a for a, flag in zip(self.assets, row) if flag]

    def to_frame(self):
        import pandas as pd

        return pd.DataFrame(
            self.delta,
            index=pd.Index(range(1, self.n_max + 1), name="cardinality"),
            columns=list(self.assets),
        )


def lambda_daily_from_annual(lambda_annual_percent: float) -> float:
    """Per-observation addend compounding to an r% p.a. enhancement.

    ln(1 + r/100) / 252, so 252 daily addends sum to the annual log uplift.
    """
    if lambda_annual_percent <= -100:
        raise ConfigError("annual enhancement must exceed -100%")
    return math.log1p(lambda_annual_percent / 100.0) / TRADING_DAYS_PER_YEAR


def build_target(index_returns, lambda_daily: float = 0.0) -> np.ndarray:
    """Enhanced target series: index log return plus the daily enhancement."""
    return np.asarray(index_returns, dtype=float) + lambda_daily


def _score(problem: RegressionProblem, loss: str) -> float:
    """Selection score; always higher-is-better (MAD negated for LAD)."""
    if loss == "ols":
        return ols_fit(problem).adjusted_r2
    return -lad_fit(problem).mad


def _argbest(scores: np.ndarray, candidates: np.ndarray) -> int:
    """Candidate with the best score; near-ties go to the lowest asset index."""
    best = np.max(scores)
    tol = _TIE_RTOL * max(1.0, abs(best))
    tied = candidates[scores >= best - tol]
    return int(tied.min())


def _attach_step(exc: Exception, what: str):
    raise type(exc)(f"{what}: {exc}") from exc


def forward_select(returns: np.ndarray, target, config: SelectionConfig,
                   assets=None) -> SelectionMatrix:
    """Greedy forward selection of assets explaining the target.

    Step 1 scores a simple regression of the target on each candidate;
    later steps score the current multiple-regression residual on each
    remaining candidate, then refit the full regression on the enlarged
    set to refresh residuals.
    """
    returns = np.asarray(returns, dtype=float)
    target = np.asarray(target, dtype=float)
    m, n_universe = returns.shape
    if assets is None:
        assets = list(range(n_universe))
    if config.direction != "forward":
        raise ConfigError("forward_select needs direction=forward")
    if n_universe == 0:
        raise ConfigError("empty universe")
    n_max = min(config.n_max, n_universe)

    chosen: list = []
    remaining = np.arange(n_universe)
    residual = target
    delta = np.zeros((n_max, n_universe), dtype=np.int8)
    for step in range(1, n_max + 1):
        scores = np.empty(len(remaining))
        for pos, j in enumerate(remaining):
            problem = RegressionProblem(returns[:, [j]], residual, config.intercept)
            try:
                scores[pos] = _score(problem, config.loss)
            except IndexTrackError as exc:
                _attach_step(exc, f"forward step {step}, candidate {assets[j]}")
        pick = _argbest(scores, remaining)
        chosen.append(pick)
        remaining = remaining[remaining != pick]
        full = RegressionProblem(returns[:, chosen], target, config.intercept)
        try:
            fit = ols_fit(full) if config.loss == "ols" else lad_fit(full)
        except IndexTrackError as exc:
            _attach_step(exc, f"forward step {step}, full refit")
        residual = fit.residuals
        delta[step - 1:, pick] = 1
    return SelectionMatrix(
        delta=delta,
        assets=[assets[j] for j in range(n_universe)],
        ordering=[assets[j] for j in chosen],
        direction="forward",
    )


def backward_eliminate(returns: np.ndarray, target, config: SelectionConfig,
                       assets=None) -> SelectionMatrix:
    """Backward elimination from the full universe down to one asset.

    At each cardinality the full regression is refit; under OLS the asset
    with minimum |t| leaves, under LAD the regression is standardized and
    the asset with minimum |beta| leaves.
    """
    returns = np.asarray(returns, dtype=float)
    target = np.asarray(target, dtype=float)
    m, n_universe = returns.shape
    if assets is None:
        assets = list(range(n_universe))
    if config.direction != "backward":
        raise ConfigError("backward_eliminate needs direction=backward")
    if n_universe == 0:
        raise ConfigError("empty universe")
    if m <= n_universe:
        raise ConfigError(
            f"backward elimination needs more observations ({m}) than assets ({n_universe})"
        )
    n_max = min(config.n_max, n_universe)

    current = list(range(n_universe))
    removed: list = []
    delta = np.zeros((n_max, n_universe), dtype=np.int8)

    def record(card: int):
        if card <= n_max:
            delta[card - 1, current] = 1

    record(len(current))
    while len(current) > 1:
        k = len(current)
        problem = RegressionProblem(returns[:, current], target, config.intercept)
        try:
            if config.loss == "ols":
                fit = ols_fit(problem)
                stats = np.abs(fit.t_values)
            else:
                fit = lad_fit(standardize(problem))
                stats = np.abs(fit.coefficients)
        except IndexTrackError as exc:
            _attach_step(exc, f"backward elimination at cardinality {k}")
        worst = np.min(stats)
        tol = _TIE_RTOL * max(1.0, abs(worst))
        tied = [current[i] for i in np.flatnonzero(stats <= worst + tol)]
        drop = min(tied)
        removed.append(drop)
        current.remove(drop)
        record(len(current))
    return SelectionMatrix(
        delta=delta,
        assets=[assets[j] for j in range(n_universe)],
        ordering=[assets[j] for j in removed],
        direction="backward",
    )


def select(returns: np.ndarray, target, config: SelectionConfig, assets=None) -> SelectionMatrix:
    """Dispatch on config.direction."""
    if config.direction == "forward":
        return forward_select(returns, target, config, assets)
    return backward_eliminate(returns, target, config, assets)
