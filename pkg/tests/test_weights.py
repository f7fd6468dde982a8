import math

import numpy as np
import pytest

from indextrack.errors import ConfigError, DataError
from indextrack.market_data import PricePanel
from indextrack.weights import (
    ObjectiveConfig,
    Portfolio,
    annualize_te,
    objective_and_gradient,
    objective_value,
    optimize_weights,
    penalty,
    penalty_raw,
    tracking_error,
    tracking_error_raw,
)

from conftest import make_basket_panel
from oracles import grid_search_weights, tracking_objective_literal


def constant_price_panel(T=10, deviations=None):
    """Panel with flat prices so the portfolio return is identically zero."""
    dates = np.datetime64("2020-01-01") + np.arange(T + 1)
    prices = np.ones((T + 1, 2)) * [50.0, 80.0]
    index_values = np.full(T + 1, 100.0)
    if deviations is not None:
        # index return path reproduces the requested deviations
        index_values = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(deviations)]))
    return PricePanel(dates=dates, assets=["a", "b"], prices=prices,
                      index_values=index_values)


class TestPortfolio:
    def test_sum_to_one_enforced(self):
        with pytest.raises(ConfigError):
            Portfolio({"a": 0.5, "b": 0.4})

    def test_positivity_enforced(self):
        with pytest.raises(ConfigError):
            Portfolio({"a": 1.2, "b": -0.2})

    def test_weight_lookup(self):
        port = Portfolio({"a": 0.6, "b": 0.4})
        assert port.weight("a") == 0.6
        assert port.weight("zzz") == 0.0


class TestTrackingErrorAndPenalty:
    def test_zero_deviation(self):
        panel = constant_price_panel(T=8)
        port = Portfolio({"a": 0.5, "b": 0.5})
        assert tracking_error(port, panel, (1, 8)) == pytest.approx(0.0, abs=1e-12)
        assert penalty(port, panel, (1, 8)) == pytest.approx(0.0, abs=1e-12)

    def test_constant_deviation(self):
        d = 0.001
        panel = constant_price_panel(T=10, deviations=np.full(10, d))
        port = Portfolio({"a": 0.5, "b": 0.5})
        te = tracking_error(port, panel, (1, 10))
        assert te == pytest.approx(100 * math.sqrt(252) * d, abs=1e-10)
        assert te == pytest.approx(1.5874, abs=1e-3)
        assert penalty(port, panel, (1, 10)) == pytest.approx(d ** 2, abs=1e-15)

    def test_alternating_deviation_zero_penalty_positive_te(self):
        d = 0.002
        devs = np.tile([d, -d], 5)
        panel = constant_price_panel(T=10, deviations=devs)
        port = Portfolio({"a": 0.5, "b": 0.5})
        assert penalty(port, panel, (1, 10)) == pytest.approx(0.0, abs=1e-15)
        assert tracking_error(port, panel, (1, 10)) > 0

    def test_matches_literal_formula(self):
        rng = np.random.default_rng(0)
        T = 30
        prices = np.exp(rng.normal(0, 0.02, (T + 1, 2)).cumsum(axis=0)) * [30.0, 90.0]
        target = rng.normal(0, 0.01, T)
        w = np.array([0.3, 0.7])
        literal = tracking_objective_literal(prices, w, target, 5.0)
        fast = objective_value(prices, w, target, 5.0)
        assert fast == pytest.approx(literal, abs=1e-12)
        te2 = tracking_error_raw(prices, w, target) ** 2
        pen = penalty_raw(prices, w, target)
        assert te2 + 5.0 * pen == pytest.approx(literal, abs=1e-12)

    def test_missing_price_in_sample_raises(self):
        panel, _ = make_basket_panel(T=20, seed=1)
        prices = panel.prices.copy()
        prices[5, 0] = np.nan
        gappy = PricePanel(dates=panel.dates, assets=panel.assets, prices=prices,
                           index_values=panel.index_values)
        port = Portfolio(dict(zip(panel.assets, [0.4, 0.4, 0.2])))
        with pytest.raises(DataError, match="missing price"):
            tracking_error(port, gappy, (1, 20))
        # out-of-sample style call carries forward instead
        te = tracking_error(port, gappy, (1, 20), carry_forward=True)
        assert np.isfinite(te)


class TestOptimizeWeights:
    def test_recovers_exact_basket(self):
        panel, expected = make_basket_panel(n_assets=2, basket_weights=(0.5, 0.5),
                                            T=100, seed=2)
        port = optimize_weights(panel.assets, panel, (1, 100))
        got = np.array([port.weights[a] for a in panel.assets])
        assert got == pytest.approx(expected, abs=1e-4)
        assert port.objective < 1e-12

    def test_single_asset_gets_weight_one(self):
        panel, _ = make_basket_panel(T=30, seed=3)
        port = optimize_weights([panel.assets[2]], panel, (1, 30))
        assert port.weights == {panel.assets[2]: 1.0}

    def test_empty_selection_rejected(self):
        panel, _ = make_basket_panel(T=30, seed=3)
        with pytest.raises(ConfigError):
            optimize_weights([], panel, (1, 30))

    def test_matches_grid_oracle_random_instances(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            n = int(rng.integers(2, 4))
            panel, _ = make_basket_panel(
                n_assets=n, basket_weights=rng.dirichlet(np.ones(n)) * 0.9,
                T=40, seed=100 + trial, noise_sigma=2e-3)
            port = optimize_weights(panel.assets, panel, (1, 40))
            prices = panel.prices
            target = panel.index_log_returns()
            grid_obj, _ = grid_search_weights(prices, target, 5.0)
            assert port.objective <= grid_obj + 1e-6

    def test_objective_no_worse_than_uniform(self):
        rng = np.random.default_rng(5)
        for trial in range(5):
            panel, _ = make_basket_panel(n_assets=3, T=50, seed=200 + trial,
                                         noise_sigma=5e-3)
            port = optimize_weights(panel.assets, panel, (1, 50))
            uniform = np.full(3, 1 / 3)
            base = objective_value(panel.prices, uniform, panel.index_log_returns(), 5.0)
            assert port.objective <= base + 1e-12

    def test_gradient_matches_finite_differences(self):
        # probe away from the optimum where gradient components are O(1e-4)
        panel, _ = make_basket_panel(n_assets=3, T=60, seed=6, noise_sigma=1e-3)
        rng = np.random.default_rng(60)
        target = panel.index_log_returns()
        for _ in range(5):
            z = rng.uniform(0.1, 1.0, 3)
            _, grad = objective_and_gradient(z, panel.prices, target, 5.0)
            h = 1e-6
            for i in range(3):
                e = np.zeros(3)
                e[i] = h
                fp, _ = objective_and_gradient(z + e, panel.prices, target, 5.0)
                fm, _ = objective_and_gradient(z - e, panel.prices, target, 5.0)
                fd = (fp - fm) / (2 * h)
                scale = max(abs(fd), abs(grad[i]), 1e-8)
                assert abs(grad[i] - fd) / scale < 1e-4

    def test_scale_invariance(self):
        panel, _ = make_basket_panel(n_assets=3, T=50, seed=7, noise_sigma=1e-3)
        port = optimize_weights(panel.assets, panel, (1, 50))
        scaled = PricePanel(dates=panel.dates, assets=panel.assets,
                            prices=panel.prices * 3.7,
                            index_values=panel.index_values)
        port_scaled = optimize_weights(panel.assets, scaled, (1, 50))
        for a in panel.assets:
            assert port.weights[a] == pytest.approx(port_scaled.weights[a], abs=1e-10)

    def test_zero_penalty_exact_span_gives_zero_te(self):
        panel, _ = make_basket_panel(n_assets=3, basket_weights=(0.4, 0.6), T=80, seed=8)
        config = ObjectiveConfig(penalty_weight=0.0)
        port = optimize_weights(panel.assets, panel, (1, 80), config)
        x = np.array([port.weights[a] for a in panel.assets])
        te = annualize_te(tracking_error_raw(panel.prices, x, panel.index_log_returns()))
        assert te < 1e-3

    def test_normalization_structural(self):
        rng = np.random.default_rng(9)
        for trial in range(20):
            panel, _ = make_basket_panel(n_assets=3, T=30, seed=300 + trial,
                                         noise_sigma=1e-2)
            port = optimize_weights(panel.assets, panel, (1, 30))
            assert abs(sum(port.weights.values()) - 1.0) < 1e-10
            assert all(w > 0 for w in port.weights.values())

    def test_warm_start_not_worse(self):
        panel, expected = make_basket_panel(n_assets=3, basket_weights=(0.5, 0.3, 0.2),
                                            T=60, seed=10, noise_sigma=1e-3)
        cold = optimize_weights(panel.assets, panel, (1, 60))
        warm = optimize_weights(panel.assets, panel, (1, 60), warm_start=cold)
        assert warm.objective <= cold.objective + 1e-12


class TestObjectiveConfig:
    def test_negative_penalty_rejected(self):
        with pytest.raises(ConfigError):
            ObjectiveConfig(penalty_weight=-1.0)
