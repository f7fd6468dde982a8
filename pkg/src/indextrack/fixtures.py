"""Deterministic synthetic datasets for tests and the self-test command.

The standard fixture holds 50 assets over ~6 years of daily prices; the
index is a fixed-share basket of 5 known assets with small lognormal
noise (daily sigma 5e-4) layered on its log returns, so selection
procedures should recover the basket constituents and tracking error has
a known floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market_data import MembershipCalendar, PricePanel

FIXTURE_NOISE_SIGMA = 5e-4


@dataclass(frozen=True)
class SyntheticDataset:
    panel: PricePanel
    members: MembershipCalendar
    true_assets: tuple
    basket_shares: dict


def synthetic_panel(n_assets: int = 50, n_days: int = 1513, n_true: int = 5,
                    noise_sigma: float = FIXTURE_NOISE_SIGMA, seed: int = 20240103,
                    start="2005-01-03", gap_assets: int = 0) -> SyntheticDataset:
    """Build the synthetic price panel.

    ``gap_assets`` marks that many extra trailing assets with a mid-sample
    price gap (for universe-filtering tests); they are never basket
    members.
    """
    rng = np.random.default_rng(seed)
    total = n_assets + gap_assets
    names = [f"A{i:03d}" for i in range(total)]

    # weekday calendar, skipping weekends
    start = np.datetime64(start, "D")
    dates = []
    d = start
    while len(dates) < n_days:
        if np.is_busday(d):
            dates.append(d)
        d += np.timedelta64(1, "D")
    dates = np.array(dates, dtype="datetime64[D]")

    drift = rng.uniform(1e-4, 3e-4, size=total)
    sigma = rng.uniform(0.008, 0.016, size=total)
    shocks = rng.standard_normal((n_days - 1, total))
    market = rng.standard_normal(n_days - 1)[:, None] * 0.004
    log_returns = drift + sigma * shocks + market
    p0 = rng.uniform(20.0, 200.0, size=total)
    prices = np.vstack([p0, p0 * np.exp(np.cumsum(log_returns, axis=0))])

    true_idx = rng.choice(n_assets, size=n_true, replace=False)
    true_idx.sort()
    weights = rng.dirichlet(np.full(n_true, 5.0))
    shares = weights / prices[0, true_idx]
    basket = prices[:, true_idx] @ shares
    noise = np.concatenate([[0.0], rng.normal(0.0, noise_sigma, size=n_days - 1)])
    index_values = 100.0 * (basket / basket[0]) * np.exp(np.cumsum(noise))

    for g in range(gap_assets):
        col = n_assets + g
        lo = n_days // 3 + 5 * g
        prices[lo:lo + 10, col] = np.nan

    panel = PricePanel(dates=dates, assets=names, prices=prices, index_values=index_values)
    members = MembershipCalendar.always(names)
    return SyntheticDataset(
        panel=panel,
        members=members,
        true_assets=tuple(names[i] for i in true_idx),
        basket_shares={names[i]: float(s) for i, s in zip(true_idx, shares)},
    )


def tiny_panel(seed: int = 7, n_assets: int = 8, n_days: int = 80) -> SyntheticDataset:
    """Small fast variant for CLI and smoke tests."""
    return synthetic_panel(n_assets=n_assets, n_days=n_days, n_true=3, seed=seed)
