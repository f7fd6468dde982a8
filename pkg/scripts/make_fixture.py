#!/usr/bin/env python3
"""Write the bundled synthetic dataset to disk as canonical CSVs.

The index is an exact fixed-share basket of a few "true" assets times a
small multiplicative noise, so a correct pipeline should recover those
assets and hit the noise-implied tracking-error floor.
"""

import argparse
import json
from pathlib import Path

from indextrack.fixtures import synthetic_panel
from indextrack.market_data import save_membership, save_price_panel


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", help="directory for panel.csv / membership.csv")
    parser.add_argument("--assets", type=int, default=50)
    parser.add_argument("--days", type=int, default=1513)
    parser.add_argument("--true-assets", type=int, default=5)
    parser.add_argument("--noise-sigma", type=float, default=5e-4)
    parser.add_argument("--seed", type=int, default=20240103)
    args = parser.parse_args()

    dataset = synthetic_panel(
        n_assets=args.assets,
        n_days=args.days,
        n_true=args.true_assets,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_price_panel(dataset.panel, out / "panel.csv")
    save_membership(dataset.members, out / "membership.csv")
    truth = {
        "true_assets": list(dataset.true_assets),
        "basket_shares": dataset.basket_shares,
        "noise_sigma": args.noise_sigma,
        "seed": args.seed,
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    print(f"wrote {dataset.panel.n_dates} dates x {dataset.panel.n_assets} assets to {out}")


if __name__ == "__main__":
    main()
