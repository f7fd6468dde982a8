import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from indextrack.fixtures import synthetic_panel, tiny_panel
from indextrack.market_data import PricePanel


@pytest.fixture(scope="session")
def fixture_dataset():
    """Standard bundled synthetic dataset: 50 assets, ~6 years, 5 true assets."""
    return synthetic_panel()


@pytest.fixture(scope="session")
def tiny_dataset():
    return tiny_panel()


def make_basket_panel(n_assets=3, basket_weights=(0.5, 0.5), T=100, seed=0,
                      noise_sigma=0.0, p0=None):
    """Panel whose index is an exact (optionally noisy) price basket.

    ``basket_weights`` are initial value weights over the first assets.
    """
    rng = np.random.default_rng(seed)
    r = rng.normal(2e-4, 0.01, (T, n_assets))
    if p0 is None:
        p0 = rng.uniform(20.0, 150.0, n_assets)
    p0 = np.asarray(p0, dtype=float)
    prices = np.vstack([p0, p0 * np.exp(np.cumsum(r, axis=0))])
    shares = np.zeros(n_assets)
    w = np.asarray(basket_weights, dtype=float)
    shares[: len(w)] = w / p0[: len(w)]
    basket = prices @ shares
    noise = np.concatenate([[0.0], rng.normal(0.0, noise_sigma, T)]) if noise_sigma else 0.0
    index_values = 100.0 * basket / basket[0] * np.exp(np.cumsum(noise) if noise_sigma else 0.0)
    dates = np.datetime64("2015-01-01") + np.arange(T + 1)
    assets = [f"S{i}" for i in range(n_assets)]
    panel = PricePanel(dates=dates, assets=assets, prices=prices, index_values=index_values)
    expected = shares / shares.sum()
    return panel, expected
