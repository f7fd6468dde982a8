"""OLS and LAD multiple regression with the fit statistics used by selection.

LAD is solved as a linear program with a primal simplex specialized to the
L1 structure: residual splitting u - v with an identity starting basis, so
a fit never needs Phase I.  Entering variable is the most negative reduced
cost (lowest index on ties); after a run of degenerate pivots the rule
falls back to Bland's to break cycles.  Breaching the iteration cap of
50 * (m + p) raises LadDegeneracyError.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DataError, DegenerateDesignError, LadDegeneracyError

logger = logging.getLogger(__name__)

_RANK_TOL = 1e-10


@dataclass(frozen=True)
class RegressionProblem:
    """Design matrix (rows = observations), response vector, intercept flag."""

    design: np.ndarray
    response: np.ndarray
    intercept: bool = True

    def __post_init__(self):
        design = np.atleast_2d(np.asarray(self.design, dtype=float))
        response = np.asarray(self.response, dtype=float).ravel()
        if design.shape[0] != response.shape[0]:
            raise DataError(
                f"design has {design.shape[0]} rows but response has {response.shape[0]}"
            )
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)

    @property
    def n_obs(self) -> int:
        return self.design.shape[0]

    @property
    def n_regressors(self) -> int:
        return self.design.shape[1]

    @property
    def n_params(self) -> int:
        return self.n_regressors + int(self.intercept)

    @property
    def well_posed(self) -> bool:
        return self.n_obs > self.n_params

    def full_design(self) -> np.ndarray:
        """Design with the intercept column prepended when present."""
        if not self.intercept:
            return self.design
        return np.column_stack([np.ones(self.n_obs), self.design])


@dataclass(frozen=True)
class RegressionFit:
    coefficients: np.ndarray
    intercept_value: Optional[float]
    residuals: np.ndarray
    adjusted_r2: float
    t_values: Optional[np.ndarray]
    mad: float
    standardized_coefficients: np.ndarray

    def fitted(self, problem: RegressionProblem) -> np.ndarray:
        base = problem.design @ self.coefficients
        if self.intercept_value is not None:
            base = base + self.intercept_value
        return base

    @property
    def sum_abs_residuals(self) -> float:
        return float(np.sum(np.abs(self.residuals)))

    @property
    def sum_sq_residuals(self) -> float:
        return float(np.sum(self.residuals ** 2))


def _check_rank(problem: RegressionProblem) -> np.ndarray:
    """Full design matrix, raising with the dependent column set if rank deficient."""
    X = problem.full_design()
    if X.shape[1] == 0:
        raise DataError("regression needs at least one parameter")
    _, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > _RANK_TOL * scale * max(X.shape)))
    if rank < X.shape[1]:
        offending = sorted(piv[rank:].tolist())
        if problem.intercept:
            offending = [c - 1 for c in offending]  # -1 marks the intercept column
        raise DegenerateDesignError(
            f"rank-deficient design (rank {rank} < {X.shape[1]})", columns=offending
        )
    return X


def adjusted_r_squared(residuals, response, n_params: int, intercept: bool) -> float:
    """Adjusted R^2 under the intercept-dependent convention.

    With an intercept: 1 - (1 - R^2)(m - 1)/(m - p - 1) with R^2 about the
    mean.  Without: uncentered R^2 = 1 - SSE/sum(y^2), adjusted by m/(m - p).
    """
    residuals = np.asarray(residuals, dtype=float)
    response = np.asarray(response, dtype=float)
    m = response.size
    sse = float(np.sum(residuals ** 2))
    if intercept:
        p = n_params - 1
        sst = float(np.sum((response - response.mean()) ** 2))
        if sst == 0.0:
            return 1.0 if sse == 0.0 else -np.inf
        r2 = 1.0 - sse / sst
        if m - p - 1 <= 0:
            return r2
        return 1.0 - (1.0 - r2) * (m - 1) / (m - p - 1)
    p = n_params
    sst = float(np.sum(response ** 2))
    if sst == 0.0:
        return 1.0 if sse == 0.0 else -np.inf
    r2 = 1.0 - sse / sst
    if m - p <= 0:
        return r2
    return 1.0 - (1.0 - r2) * m / (m - p)


def _standardized_coefficients(problem: RegressionProblem, coefficients: np.ndarray) -> np.ndarray:
    sx = np.std(problem.design, axis=0, ddof=1)
    sy = np.std(problem.response, ddof=1)
    if sy == 0:
        return np.zeros_like(coefficients)
    return coefficients * sx / sy


def _assemble_fit(problem: RegressionProblem, params: np.ndarray,
                  t_values: Optional[np.ndarray]) -> RegressionFit:
    if problem.intercept:
        intercept_value = float(params[0])
        coefficients = params[1:].copy()
    else:
        intercept_value = None
        coefficients = params.copy()
    residuals = problem.response - (problem.design @ coefficients
                                    + (intercept_value or 0.0))
    return RegressionFit(
        coefficients=coefficients,
        intercept_value=intercept_value,
        residuals=residuals,
        adjusted_r2=adjusted_r_squared(residuals, problem.response,
                                       problem.n_params, problem.intercept),
        t_values=t_values,
        mad=float(np.mean(np.abs(residuals))),
        standardized_coefficients=_standardized_coefficients(problem, coefficients),
    )


def ols_fit(problem: RegressionProblem) -> RegressionFit:
    """Least-squares fit with t-values and adjusted R^2."""
    X = _check_rank(problem)
    y = problem.response
    params, *_ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ params
    m, k = X.shape
    dof = m - k
    t_values = None
    if dof > 0:
        sigma2 = float(residuals @ residuals) / dof
        xtx_inv = np.linalg.inv(X.T @ X)
        se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t_full = np.where(se > 0, params / se, np.inf * np.sign(params))
        t_values = t_full[1:] if problem.intercept else t_full
    return _assemble_fit(problem, params, t_values)


def lad_fit(problem: RegressionProblem, max_iter: Optional[int] = None,
            trace: Optional[list] = None) -> RegressionFit:
    """Least-absolute-deviation fit via the specialized primal simplex.

    ``trace``, when given a list, receives one (iteration, entering,
    leaving, objective) tuple per pivot for debugging.
    """
    X = _check_rank(problem)
    y = problem.response
    params = _l1_simplex(X, y, max_iter=max_iter, trace=trace)
    return _assemble_fit(problem, params, None)


def _l1_simplex(X: np.ndarray, y: np.ndarray, max_iter=None, trace=None) -> np.ndarray:
    """Minimize sum |y - X b| by primal simplex on the split formulation.

    Variables: b+ (p), b- (p), u (m), v (m), all nonnegative, with
    X(b+ - b-) + u - v = y.  Rows with negative y are negated so the
    starting basis (one residual variable per row) is the identity.
    """
    m, p = X.shape
    if max_iter is None:
        max_iter = 50 * (m + p)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(y))) if m else 1.0)

    sign = np.where(y >= 0, 1.0, -1.0)
    # Tableau columns: [b+ | b- | u | v]; rows pre-scaled by sign.
    T = np.empty((m, 2 * p + 2 * m))
    T[:, :p] = X * sign[:, None]
    T[:, p:2 * p] = -T[:, :p]
    T[:, 2 * p:2 * p + m] = np.diag(sign)
    T[:, 2 * p + m:] = -T[:, 2 * p:2 * p + m]
    rhs = np.abs(y).astype(float)
    cost = np.concatenate([np.zeros(2 * p), np.ones(2 * m)])
    # basis[i] = column index of the basic variable in row i
    basis = np.where(y >= 0, 2 * p + np.arange(m), 2 * p + m + np.arange(m))

    degenerate_run = 0
    for iteration in range(max_iter):
        cb = cost[basis]
        reduced = cost - cb @ T
        reduced[basis] = 0.0
        if degenerate_run > 2 * (m + p):
            candidates = np.flatnonzero(reduced < -tol)
            entering = int(candidates[0]) if candidates.size else -1
        else:
            entering = int(np.argmin(reduced))
            if reduced[entering] >= -tol:
                entering = -1
        if entering < 0:
            break
        col = T[:, entering]
        positive = col > tol
        if not positive.any():
            raise LadDegeneracyError("unbounded L1 linear program (corrupt data?)")
        ratios = np.where(positive, rhs / np.where(positive, col, 1.0), np.inf)
        best = np.min(ratios)
        # leaving row: minimal ratio, lowest basic-variable index on ties
        tied = np.flatnonzero(ratios <= best * (1 + 1e-12) + 1e-15)
        leaving = int(tied[np.argmin(basis[tied])])
        if best <= tol:
            degenerate_run += 1
        else:
            degenerate_run = 0
        pivot = T[leaving, entering]
        T[leaving] /= pivot
        rhs[leaving] /= pivot
        other = np.arange(m) != leaving
        factors = T[other, entering].copy()
        T[other] -= np.outer(factors, T[leaving])
        rhs[other] -= factors * rhs[leaving]
        np.maximum(rhs, 0.0, out=rhs)
        basis[leaving] = entering
        if trace is not None:
            trace.append((iteration, entering, leaving, float(cost[basis] @ rhs)))
    else:
        raise LadDegeneracyError(
            f"L1 simplex exceeded {max_iter} iterations (degenerate LP)"
        )

    solution = np.zeros(2 * p + 2 * m)
    solution[basis] = rhs
    return solution[:p] - solution[p:2 * p]


def standardize(problem: RegressionProblem) -> RegressionProblem:
    """Rescale every regressor column and the response to zero mean, unit sample std."""
    design = problem.design
    stds = np.std(design, axis=0, ddof=1) if problem.n_obs > 1 else np.zeros(problem.n_regressors)
    zero = np.flatnonzero(stds == 0)
    if zero.size:
        raise DataError(f"zero-variance regressor column(s) {zero.tolist()}")
    sy = np.std(problem.response, ddof=1) if problem.n_obs > 1 else 0.0
    if sy == 0:
        raise DataError("zero-variance response")
    return RegressionProblem(
        design=(design - design.mean(axis=0)) / stds,
        response=(problem.response - problem.response.mean()) / sy,
        intercept=problem.intercept,
    )
