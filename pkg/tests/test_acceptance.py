"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criteria 1-8 run on bundled synthetic data only.  Criteria 9-11 replicate
published full-dataset results and are skipped unless INDEXTRACK_DATASET
points at a canonical panel CSV (INDEXTRACK_MEMBERSHIP and
INDEXTRACK_RISK_FREE optionally supply the calendar and rate series).
"""

import functools
import math
import os
import time

import numpy as np
import pytest

from indextrack.analytics import fit_power_law, gain_loss, sharpe, sortino
from indextrack.backtest import BacktestConfig, run_backtest, transaction_volume
from indextrack.market_data import (
    MembershipCalendar,
    PricePanel,
    load_membership,
    load_price_panel,
)
from indextrack.preselect import SelectionConfig, backward_eliminate, forward_select
from indextrack.regression import RegressionProblem, lad_fit
from indextrack.weights import (
    ObjectiveConfig,
    Portfolio,
    optimize_weights,
    penalty,
    tracking_error,
)

from conftest import make_basket_panel
from oracles import (
    adjusted_r2_direct,
    grid_search_weights,
    lad_enumerate,
    lad_linprog,
    ols_normal_equations,
    ols_t_values,
    standardize_direct,
)


def criterion(number, label):
    """Print one PASS/FAIL line per acceptance criterion."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"criterion {number} ({label}): FAIL")
                raise
            print(f"criterion {number} ({label}): PASS")

        return run

    return wrap


def random_selection_instance(rng):
    m = int(rng.integers(20, 61))
    M = int(rng.integers(3, 13))
    returns = rng.standard_normal((m, M)) * 0.01
    weights = rng.dirichlet(np.ones(min(4, M)))
    target = returns[:, : len(weights)] @ weights + rng.standard_normal(m) * 0.003
    return returns, target


def lad_mad(X, y, intercept):
    obj, _ = lad_linprog(X, y, intercept)
    return obj / len(y)


def lad_residuals(X, y, intercept):
    from oracles import full_design

    _, beta = lad_linprog(X, y, intercept)
    return np.asarray(y, dtype=float) - full_design(X, intercept) @ beta


def oracle_forward_steps(returns, target, loss, intercept, n_max):
    """Chosen-asset sequence from exhaustive per-step re-scoring."""
    m, M = returns.shape
    chosen = []
    residual = target
    for _ in range(n_max):
        remaining = [j for j in range(M) if j not in chosen]
        if loss == "ols":
            scores = np.array([adjusted_r2_direct(returns[:, [j]], residual, intercept)
                               for j in remaining])
        else:
            scores = np.array([-lad_mad(returns[:, [j]], residual, intercept)
                               for j in remaining])
        best = scores.max()
        pick = min(j for j, s in zip(remaining, scores) if s >= best - 1e-9)
        chosen.append(pick)
        if loss == "ols":
            beta = ols_normal_equations(returns[:, chosen], target, intercept)
            from oracles import full_design

            residual = target - full_design(returns[:, chosen], intercept) @ beta
        else:
            residual = lad_residuals(returns[:, chosen], target, intercept)
    return chosen


def oracle_backward_steps(returns, target, loss, intercept):
    """Dropped-asset sequence from exhaustive elimination scoring."""
    M = returns.shape[1]
    current = list(range(M))
    dropped = []
    while len(current) > 1:
        if loss == "ols":
            stats = np.abs(ols_t_values(returns[:, current], target, intercept))
        else:
            Xs, ys = standardize_direct(returns[:, current], target)
            _, beta = lad_linprog(Xs, ys, intercept)
            stats = np.abs(beta[1:] if intercept else beta)
        worst = stats.min()
        drop = min(c for c, s in zip(current, stats) if s <= worst + 1e-9)
        dropped.append(drop)
        current.remove(drop)
    return dropped


@criterion(1, "selection-oracle equivalence")
def test_criterion_1_selection_oracle_equivalence():
    rng = np.random.default_rng(101)
    started = time.time()
    for trial in range(30):
        returns, target = random_selection_instance(rng)
        loss = "lad" if trial % 3 == 2 else "ols"
        intercept = bool(trial % 2)
        n_max = min(4, returns.shape[1])

        fs = forward_select(returns, target,
                            SelectionConfig(direction="forward", loss=loss,
                                            intercept=intercept, n_max=n_max))
        expected = oracle_forward_steps(returns, target, loss, intercept, n_max)
        assert list(fs.ordering) == expected, f"forward trial {trial}"

        be = backward_eliminate(returns, target,
                                SelectionConfig(direction="backward", loss=loss,
                                                intercept=intercept,
                                                n_max=returns.shape[1]))
        expected = oracle_backward_steps(returns, target, loss, intercept)
        assert list(be.ordering) == expected, f"backward trial {trial}"
    assert time.time() - started < 30.0


@criterion(2, "LAD enumeration equivalence")
def test_criterion_2_lad_enumeration():
    rng = np.random.default_rng(202)
    started = time.time()
    done = 0
    while done < 50:
        m = int(rng.integers(2, 7))
        intercept = bool(rng.integers(0, 2))
        p = int(rng.integers(0 if intercept else 1, 3 - int(intercept)))
        n_params = p + int(intercept)
        if n_params == 0 or n_params > m:
            continue
        X = rng.standard_normal((m, p))
        y = rng.standard_normal(m)
        fit = lad_fit(RegressionProblem(X, y, intercept))
        best, _ = lad_enumerate(X, y, intercept)
        assert abs(fit.sum_abs_residuals - best) < 1e-8
        done += 1
    assert time.time() - started < 10.0


@criterion(3, "optimizer-oracle equivalence")
def test_criterion_3_optimizer_grid_oracle():
    rng = np.random.default_rng(303)
    started = time.time()
    for trial in range(25):
        n = 2 + trial % 2
        weights = rng.dirichlet(np.ones(n))
        panel, _ = make_basket_panel(n_assets=n, basket_weights=weights, T=40,
                                     seed=int(rng.integers(1 << 30)),
                                     noise_sigma=3e-3)
        port = optimize_weights(panel.assets, panel, (1, 40))
        grid_obj, _ = grid_search_weights(panel.prices, panel.index_log_returns(), 5.0)
        assert port.objective <= grid_obj + 1e-6, f"trial {trial}"
    assert time.time() - started < 60.0


@criterion(4, "objective identities")
def test_criterion_4_objective_identities():
    d = 1e-3
    T = 10
    dates = np.datetime64("2020-01-01") + np.arange(T + 1)
    prices = np.ones((T + 1, 2)) * [50.0, 80.0]

    # alternating +/- d deviations: penalty exactly zero, TE positive
    devs = np.tile([d, -d], T // 2)
    panel = PricePanel(dates=dates, assets=["a", "b"], prices=prices,
                       index_values=100.0 * np.exp(np.concatenate([[0.0], np.cumsum(devs)])))
    port = Portfolio({"a": 0.5, "b": 0.5})
    assert penalty(port, panel, (1, T)) == 0.0
    assert tracking_error(port, panel, (1, T)) > 0.0

    # constant deviation d: annualized TE = 100 sqrt(252) d to 1e-10
    panel = PricePanel(dates=dates, assets=["a", "b"], prices=prices,
                       index_values=100.0 * np.exp(d * np.arange(T + 1)))
    te = tracking_error(port, panel, (1, T))
    assert abs(te - 100.0 * math.sqrt(252) * d) < 1e-10


@criterion(5, "synthetic recovery")
def test_criterion_5_synthetic_recovery(fixture_dataset):
    floor = 100.0 * math.sqrt(252) * 5e-4
    for direction in ("forward", "backward"):
        config = BacktestConfig(
            selection=SelectionConfig(direction=direction, loss="ols",
                                      intercept=False, n_max=5),
            n_in="3y", n_out="1y", cardinalities=(5,),
        )
        results = run_backtest(fixture_dataset.panel, fixture_dataset.members, config)
        for period in results:
            cell = period.cells[5]
            assert cell.error == ""
            hits = set(cell.portfolio.assets) & set(fixture_dataset.true_assets)
            assert len(hits) >= 4, (direction, period.K, sorted(cell.portfolio.assets))
            assert cell.out_sample_te < 3.0 * floor, (direction, period.K, cell.out_sample_te)


@criterion(6, "power-law recovery")
def test_criterion_6_power_law_recovery():
    procs = {"BE-OLS(n)": 0.0, "FS-OLS(n)": 0.06, "BE-LAD(n)": -0.04}
    cards = (5, 10, 20, 30, 50, 70, 100)

    exact = [(p, n, math.exp(2.99 - 0.58 * math.log(n) + dummy))
             for p, dummy in procs.items() for n in cards]
    fit = fit_power_law(exact, base_procedure="BE-OLS(n)")
    assert abs(fit.alpha0 - 2.99) < 1e-10
    assert abs(fit.alpha1 + 0.58) < 1e-10

    errors = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        noisy = [(p, n, te * (1.0 + rng.normal(0.0, 0.05))) for p, n, te in exact]
        fit = fit_power_law(noisy, base_procedure="BE-OLS(n)")
        errors.append(abs(fit.alpha1 + 0.58))
    assert max(errors) < 0.05 or np.mean(errors) < 0.05
    assert np.mean(errors) < 0.05


@criterion(7, "return-risk ratio oracles")
def test_criterion_7_ratio_oracles():
    rng = np.random.default_rng(707)
    for _ in range(3):
        y = np.round(rng.normal(0.0, 0.004, 10), 5)
        if (y > 0).sum() in (0, 10):
            y[0], y[1] = abs(y[0]), -abs(y[1])
        T = len(y)
        s1, s2 = y.sum(), (y ** 2).sum()
        s1p = y[y > 0].sum()
        s1m = -y[y <= 0].sum()
        s2m = (y[y <= 0] ** 2).sum()
        mean_pa = 100 * 252 * s1 / T
        assert abs(sharpe(y) - mean_pa / (100 * math.sqrt(252 * (s2 - s1 ** 2 / T) / T))) < 1e-10
        assert abs(gain_loss(y) - s1p / s1m) < 1e-10
        assert abs(sortino(y) - mean_pa / (100 * math.sqrt(252 * s2m / T))) < 1e-10
    assert gain_loss(np.array([1.0, 2.0, -1.0, -2.0])) == 1.0


@criterion(8, "structural invariants")
def test_criterion_8_structural_invariants():
    rng = np.random.default_rng(808)

    # delta nesting over 1000 random selections, both directions
    for _ in range(1000):
        m = int(rng.integers(8, 25))
        M = int(rng.integers(2, 7))
        returns = rng.standard_normal((m, M))
        target = rng.standard_normal(m)
        if rng.integers(0, 2) and m > M:
            sel = backward_eliminate(returns, target,
                                     SelectionConfig(direction="backward", n_max=M))
        else:
            sel = forward_select(returns, target,
                                 SelectionConfig(direction="forward", n_max=M))
        delta = sel.delta
        for n in range(delta.shape[0]):
            assert delta[n].sum() == n + 1
            if n + 1 < delta.shape[0]:
                assert np.all(delta[n] <= delta[n + 1])

    # portfolio normalization over 1000 optimizations
    for trial in range(1000):
        n = int(rng.integers(2, 4))
        panel, _ = make_basket_panel(n_assets=n,
                                     basket_weights=rng.dirichlet(np.ones(n)),
                                     T=15, seed=int(rng.integers(1 << 30)),
                                     noise_sigma=5e-3)
        port = optimize_weights(panel.assets, panel, (1, 15))
        assert abs(sum(port.weights.values()) - 1.0) < 1e-10
        assert all(w > 0 for w in port.weights.values())

    # transaction-volume bounds over 1000 random portfolio pairs
    names = [f"X{i}" for i in range(10)]
    for _ in range(1000):
        ka, kb = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        a = dict(zip(rng.choice(names, ka, replace=False), rng.dirichlet(np.ones(ka))))
        b = dict(zip(rng.choice(names, kb, replace=False), rng.dirichlet(np.ones(kb))))
        vol = transaction_volume(Portfolio(a), Portfolio(b))
        assert -1e-12 <= vol <= 2.0 + 1e-12

    # no-lookahead: poisoning data after the estimation window never moves
    # the selection or the fitted weights
    for _ in range(1000):
        m_in, m_out, M = 20, 8, 4
        T = m_in + m_out
        r = rng.normal(0.0, 0.01, (T, M))
        p0 = rng.uniform(20.0, 100.0, M)
        prices = np.vstack([p0, p0 * np.exp(np.cumsum(r, axis=0))])
        index_values = 100.0 * np.exp(np.cumsum(
            np.concatenate([[0.0], r[:, 0] * 0.5 + r[:, 1] * 0.5])))
        dates = np.datetime64("2020-01-01") + np.arange(T + 1)
        assets = [f"A{i}" for i in range(M)]
        clean = PricePanel(dates=dates, assets=assets, prices=prices,
                           index_values=index_values)
        poisoned_prices = prices.copy()
        poisoned_prices[m_in + 1:] *= rng.uniform(0.5, 2.0, (m_out, M))
        poisoned = PricePanel(dates=dates, assets=assets, prices=poisoned_prices,
                              index_values=index_values)
        config = SelectionConfig(direction="forward", n_max=2)
        target = clean.index_log_returns()[:m_in]
        sel_a = forward_select(r[:m_in], target, config, assets=assets)
        sel_b = forward_select(poisoned.asset_log_returns()[:m_in], target, config,
                               assets=assets)
        assert sel_a.ordering == sel_b.ordering
        port_a = optimize_weights(sel_a.selected(2), clean, (1, m_in))
        port_b = optimize_weights(sel_b.selected(2), poisoned, (1, m_in))
        assert port_a.weights == port_b.weights


# ---------------------------------------------------------------------------
# full-data replication (optional)
# ---------------------------------------------------------------------------

DATASET = os.environ.get("INDEXTRACK_DATASET")
needs_dataset = pytest.mark.skipif(
    not DATASET, reason="set INDEXTRACK_DATASET to a canonical panel CSV")


@pytest.fixture(scope="module")
def full_dataset():
    panel = load_price_panel(DATASET)
    membership_path = os.environ.get("INDEXTRACK_MEMBERSHIP")
    members = (load_membership(membership_path) if membership_path
               else MembershipCalendar.always(panel.assets))
    return panel, members


def full_run(panel, members, direction, intercept=False):
    config = BacktestConfig(
        selection=SelectionConfig(direction=direction, loss="ols",
                                  intercept=intercept, n_max=100),
        n_in="3y", n_out="1y", cardinalities=(5, 10, 20, 30, 50, 70, 100),
    )
    return config, run_backtest(panel, members, config)


@needs_dataset
@criterion(9, "published mean out-of-sample TE")
def test_criterion_9_full_data_te(full_dataset):
    panel, members = full_dataset
    published = {5: 4.21, 10: 3.27, 20: 2.65, 30: 2.39, 50: 2.08, 70: 1.90, 100: 1.72}
    _, results = full_run(panel, members, "backward")
    for card, expected in published.items():
        tes = [p.cells[card].out_sample_te for p in results if not p.cells[card].error]
        assert tes, f"no successful periods at cardinality {card}"
        mean = float(np.mean(tes))
        assert abs(mean - expected) <= 0.15, (card, mean, expected)


@needs_dataset
@criterion(10, "published power-law slope")
def test_criterion_10_full_data_power_law(full_dataset):
    panel, members = full_dataset
    records = []
    insignificant_tag = "BE-OLS(c)"
    for direction in ("backward", "forward"):
        for intercept in (False, True):
            config, results = full_run(panel, members, direction, intercept)
            for period in results:
                for card, cell in period.cells.items():
                    if not cell.error and cell.out_sample_te > 0:
                        records.append((config.selection.tag, card, cell.out_sample_te))
    fit = fit_power_law(records, base_procedure="BE-OLS(n)")
    assert abs(fit.alpha1 + 0.58) <= 0.05, fit.alpha1
    assert abs(fit.dummy_coefficients[insignificant_tag]) < 0.01
    assert fit.p_values[insignificant_tag] > 0.5


@needs_dataset
@pytest.mark.skipif(not os.environ.get("INDEXTRACK_RISK_FREE"),
                    reason="set INDEXTRACK_RISK_FREE to a date,rate CSV")
@criterion(11, "published index ratios")
def test_criterion_11_full_data_index_ratios(full_dataset):
    import pandas as pd

    from indextrack.analytics import align_risk_free, excess_returns
    from indextrack.market_data import observation_price_rows, window_schedule

    panel, members = full_dataset
    schedule = window_schedule(panel.n_observations, 754, 251)
    returns = panel.index_log_returns()
    chained = []
    chained_dates = []
    for _, _, out_range in schedule.windows:
        chained.append(returns[out_range[0] - 1:out_range[1]])
        lo, hi = observation_price_rows(out_range)
        chained_dates.append(panel.dates[lo + 1:hi + 1])
    y = np.concatenate(chained)
    dates = np.concatenate(chained_dates)

    rf = pd.read_csv(os.environ["INDEXTRACK_RISK_FREE"])
    rf_dates = pd.to_datetime(rf.iloc[:, 0]).to_numpy(dtype="datetime64[D]")
    rf_rates = pd.to_numeric(rf.iloc[:, 1], errors="coerce").to_numpy(dtype=float)
    keep = ~np.isnan(rf_rates)
    excess = excess_returns(y, align_risk_free(dates, rf_dates[keep], rf_rates[keep]))

    assert abs(sharpe(excess) - 0.474) <= 0.01
    assert abs(gain_loss(excess) - 1.095) <= 0.01
    assert abs(sortino(excess) - 0.653) <= 0.01
