#!/usr/bin/env python3
"""Run the full study: 8 backtests (one per procedure) plus the report.

Procedures are the cross product of direction (fs/be), loss (ols/lad),
and intercept (n/c).  Each run lands in <out>/run_<TAG>/ and the report
tables in <out>/report/.  On the real ~4800-day dataset this takes hours;
pass --quick to shrink windows and cardinalities for a smoke run.
"""

import argparse
import itertools
import sys
from pathlib import Path

from indextrack.cli import main as cli_main
from indextrack.preselect import SelectionConfig

PROCEDURES = list(itertools.product(("be", "fs"), ("ols", "lad"), ("n", "c")))


def tag_of(direction, loss, intercept):
    return SelectionConfig(
        direction="forward" if direction == "fs" else "backward",
        loss=loss, intercept=intercept == "c",
    ).tag


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("panel", help="canonical panel CSV")
    parser.add_argument("--membership", help="membership calendar CSV")
    parser.add_argument("--out", default="replication")
    parser.add_argument("--nin", default="3y")
    parser.add_argument("--nout", default="1y")
    parser.add_argument("--cardinalities", default="5,10,20,30,50,70,100")
    parser.add_argument("--risk-free", help="date,rate CSV for the ratio table")
    parser.add_argument("--quick", action="store_true",
                        help="small windows / cardinalities for a fast check")
    args = parser.parse_args()

    if args.quick:
        args.nin, args.nout, args.cardinalities = "251", "63", "2,3,5"

    out = Path(args.out)
    run_dirs = []
    for direction, loss, intercept in PROCEDURES:
        tag = tag_of(direction, loss, intercept)
        run_dir = out / ("run_" + tag.replace("(", "_").replace(")", ""))
        argv = ["backtest", "--panel", args.panel,
                "--nin", args.nin, "--nout", args.nout,
                "--direction", direction, "--loss", loss, "--intercept", intercept,
                "--cardinalities", args.cardinalities, "--out-dir", str(run_dir)]
        if args.membership:
            argv += ["--membership", args.membership]
        print(f"== {tag} -> {run_dir}")
        code = cli_main(argv)
        if code != 0:
            print(f"{tag} exited {code}; stopping", file=sys.stderr)
            return code
        run_dirs.append(str(run_dir))

    argv = ["report", *run_dirs, "--out-dir", str(out / "report")]
    if args.risk_free:
        argv += ["--risk-free", args.risk_free]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
