"""Command-line front end.

Subcommands: convert, backtest, sweep, report, selftest.  Runs are driven
by a declarative ``key = value`` config file; command-line flags override
config keys.  Every run directory holds a manifest recording the config
snapshot and the dataset digest, and all files are written atomically
(write-then-rename).

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure (including incomplete backtest cells).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .analytics import (
    align_risk_free,
    average_rank,
    excess_returns,
    fit_power_law,
    gain_loss,
    overlap_percent,
    sharpe,
    sortino,
    te_volatility_correlation,
)
from .backtest import BacktestConfig, completeness, results_frame, run_backtest
from .errors import ConfigError, DataError, IndexTrackError, NumericalError
from .fixtures import tiny_panel
from .market_data import (
    MembershipCalendar,
    PricePanel,
    load_membership,
    load_price_panel,
    resolve_period,
    save_membership,
    save_price_panel,
)
from .preselect import SelectionConfig
from .weights import ObjectiveConfig

logger = logging.getLogger(__name__)

REPORT_CARDINALITIES = (5, 10, 20, 30, 50, 70, 100)
RANK_RANGE = (5, 100)


# ---------------------------------------------------------------------------
# config file handling
# ---------------------------------------------------------------------------

def parse_config_file(path) -> dict:
    """Parse the ``key = value`` config format ('#' starts a comment)."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower().replace("-", "_")] = value.strip()
    return out


def _parse_bool_intercept(value) -> bool:
    text = str(value).strip().lower()
    if text in ("c", "1", "true", "yes"):
        return True
    if text in ("n", "0", "false", "no"):
        return False
    raise ConfigError(f"intercept must be c or n, got {value!r}")


def _parse_list(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return list(value)
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _direction_name(value) -> str:
    text = str(value).strip().lower()
    if text in ("fs", "forward"):
        return "forward"
    if text in ("be", "backward"):
        return "backward"
    raise ConfigError(f"direction must be fs or be, got {value!r}")


def build_backtest_config(settings: dict) -> BacktestConfig:
    cards = _parse_list(settings.get("cardinalities")) or list(REPORT_CARDINALITIES)
    cards = [int(c) for c in cards]
    n_max = int(settings.get("nmax", max(cards)))
    selection = SelectionConfig(
        direction=_direction_name(settings.get("direction", "be")),
        loss=str(settings.get("loss", "ols")).lower(),
        intercept=_parse_bool_intercept(settings.get("intercept", "n")),
        n_max=n_max,
        lambda_daily=0.0,
    )
    objective = ObjectiveConfig(
        penalty_weight=float(settings.get("penalty_weight", 5.0)),
    )
    return BacktestConfig(
        selection=selection,
        objective=objective,
        n_in=settings.get("nin", "3y"),
        n_out=settings.get("nout", "1y"),
        cardinalities=tuple(cards),
        lambda_annual=float(settings.get("lambda_annual", 0.0)),
    )


def load_inputs(settings: dict):
    panel_path = settings.get("panel")
    if not panel_path:
        raise ConfigError("config needs a 'panel' path")
    panel = load_price_panel(panel_path, settings.get("format", "canonical"))
    membership_path = settings.get("membership")
    if membership_path:
        members = load_membership(membership_path)
    else:
        members = MembershipCalendar.always(panel.assets)
    return panel, members


def dataset_digest(settings: dict) -> str:
    h = hashlib.sha256()
    for key in ("panel", "membership"):
        path = settings.get(key)
        if path:
            h.update(Path(path).read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# atomic writes
# ---------------------------------------------------------------------------

def write_atomic(path: Path, content: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def frame_to_atomic_csv(frame: pd.DataFrame, path: Path, index=False) -> None:
    write_atomic(path, frame.to_csv(index=index))


# ---------------------------------------------------------------------------
# backtest runs
# ---------------------------------------------------------------------------

def config_snapshot(config: BacktestConfig) -> dict:
    snap = dataclasses.asdict(config)
    snap["procedure"] = config.selection.tag
    return snap


def max_universe_size(panel: PricePanel, members: MembershipCalendar,
                      n_in, n_out) -> int:
    """Largest per-period eligible universe for a window configuration."""
    import warnings

    from .market_data import eligible_universe, window_schedule

    schedule = window_schedule(panel.n_observations, resolve_period(n_in),
                               resolve_period(n_out))
    sizes = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _, in_range, _ in schedule.windows:
            sizes.append(len(eligible_universe(panel, members, in_range)))
    return max(sizes) if sizes else 0


def execute_backtest(settings: dict, out_dir: Path) -> int:
    """Run one backtest into ``out_dir``; returns cells failed."""
    panel, members = load_inputs(settings)
    config = build_backtest_config(settings)
    if config.selection.direction == "backward":
        n_in = resolve_period(config.n_in)
        biggest = max_universe_size(panel, members, config.n_in, config.n_out)
        if n_in <= biggest:
            raise ConfigError(
                f"backward elimination needs n_in ({n_in}) > the eligible universe "
                f"({biggest} assets at its largest); use direction = fs"
            )
    started = time.time()
    results = run_backtest(panel, members, config)
    attempted, succeeded = completeness(results)

    out_dir = Path(out_dir)
    frame = results_frame(results, config)
    frame_to_atomic_csv(frame, out_dir / "results.csv")

    dates = panel.dates
    index_returns = panel.index_log_returns()
    returns_rows = []
    for period in results:
        out_lo, out_hi = period.out_range
        out_dates = dates[out_lo:out_hi + 1]
        idx = index_returns[out_lo - 1:out_hi]
        for card, cell in sorted(period.cells.items()):
            if cell.out_sample_returns is None:
                continue
            for d, pr, ir in zip(out_dates, cell.out_sample_returns, idx):
                returns_rows.append(
                    {"K": period.K, "cardinality": card, "date": str(d),
                     "portfolio_return": pr, "index_return": ir}
                )
    frame_to_atomic_csv(pd.DataFrame(returns_rows), out_dir / "returns.csv")

    sel_dir = out_dir / "selections"
    port_dir = out_dir / "portfolios"
    for period in results:
        cards = [c for c in sorted(period.cells) if period.cells[c].portfolio is not None]
        if not cards:
            continue
        rows = []
        for card in cards:
            cell = period.cells[card]
            rows.append({"cardinality": card,
                         **{a: 1 for a in cell.portfolio.assets}})
            port = pd.DataFrame(
                sorted(cell.portfolio.weights.items()),
                columns=["asset", "weight"],
            )
            frame_to_atomic_csv(port, port_dir / f"period_{period.K:02d}_n{card}.csv")
        sel = pd.DataFrame(rows).fillna(0)
        asset_cols = sorted(c for c in sel.columns if c != "cardinality")
        sel = sel[["cardinality"] + asset_cols].astype({c: int for c in asset_cols})
        frame_to_atomic_csv(sel, sel_dir / f"period_{period.K:02d}.csv")

    manifest = {
        "tool": "indextrack",
        "version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "elapsed_seconds": round(time.time() - started, 3),
        "config": config_snapshot(config),
        "settings": {k: str(v) for k, v in sorted(settings.items())},
        "dataset_digest": dataset_digest(settings),
        "results_file": "results.csv",
        "completeness": {"attempted": attempted, "succeeded": succeeded},
    }
    write_atomic(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return attempted - succeeded


def cmd_backtest(args) -> int:
    settings = collect_settings(args)
    out_dir = Path(settings.get("out_dir", "run"))
    failed = execute_backtest(settings, out_dir)
    print(f"backtest complete: results in {out_dir}")
    if failed:
        print(f"{failed} cell(s) failed; see results.csv error column", file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_cell(payload):
    settings, out_dir = payload
    failed = execute_backtest(settings, Path(out_dir))
    return str(out_dir), failed


def cmd_sweep(args) -> int:
    settings = collect_settings(args)
    nin_grid = _parse_list(settings.get("nin_grid")) or ["2y", "3y", "4y"]
    nout_grid = _parse_list(settings.get("nout_grid")) or ["3m", "6m", "1y"]
    lambda_grid = _parse_list(settings.get("lambda_grid"))
    if lambda_grid is None:
        lambda_grid = [settings.get("lambda_annual", "0")]
    if not lambda_grid:
        raise ConfigError("lambda grid must not be empty")
    lambda_grid = [float(v) for v in lambda_grid]
    for label in nin_grid + nout_grid:
        resolve_period(label)

    panel, members = load_inputs(settings)
    out_dir = Path(settings.get("out_dir", "sweep"))
    universe_cache = {}
    jobs = []
    for lam in lambda_grid:
        for nin in nin_grid:
            for nout in nout_grid:
                cell = dict(settings)
                cell["nin"] = nin
                cell["nout"] = nout
                cell["lambda_annual"] = str(lam)
                # backward elimination is infeasible when the estimation
                # window is not longer than the universe
                key = (nin, nout)
                if key not in universe_cache:
                    universe_cache[key] = max_universe_size(panel, members, nin, nout)
                if resolve_period(nin) <= universe_cache[key]:
                    cell["direction"] = "fs"
                cell_dir = out_dir / f"cell_nin{nin}_nout{nout}_lam{lam:g}"
                jobs.append((cell, str(cell_dir)))

    workers = int(settings.get("workers", 1))
    total_failed = 0
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell_dir, failed in pool.map(_sweep_cell, jobs):
                total_failed += failed
    else:
        for job in jobs:
            _, failed = _sweep_cell(job)
            total_failed += failed

    for lam in lambda_grid:
        summary = sweep_summary(out_dir, nin_grid, nout_grid, lam)
        name = "table5.csv" if lam == 0 else f"table6_lambda{lam:g}.csv"
        frame_to_atomic_csv(summary, out_dir / name)
    print(f"sweep complete: {len(jobs)} cells in {out_dir}")
    return 3 if total_failed else 0


def sweep_summary(out_dir: Path, nin_grid, nout_grid, lam: float) -> pd.DataFrame:
    """Grid summary: mean out-of-sample TE (or enhanced return) and volume p.a."""
    metric = "out_sample_te" if lam == 0 else "enhanced_return"
    rows = []
    for nin in nin_grid:
        for nout in nout_grid:
            cell_dir = Path(out_dir) / f"cell_nin{nin}_nout{nout}_lam{lam:g}"
            frame = pd.read_csv(cell_dir / "results.csv")
            ok = frame[frame["error"].isna() | (frame["error"] == "")]
            for name, series in ((metric, ok[metric]),
                                 ("transaction_volume_pa",
                                  ok.loc[ok["K"] > 1, "transaction_volume_pa"])):
                grouped = ok.assign(value=series).groupby("cardinality")["value"].mean()
                rows.append({"nin": nin, "nout": nout, "metric": name,
                             **{int(c): grouped.get(c, np.nan) for c in grouped.index}})
    frame = pd.DataFrame(rows)
    value_cols = [c for c in frame.columns if isinstance(c, int)]
    rank_cols = [c for c in value_cols if RANK_RANGE[0] <= c <= RANK_RANGE[1]]
    for name in frame["metric"].unique():
        mask = frame["metric"] == name
        block = frame.loc[mask, rank_cols].to_numpy(dtype=float)
        if rank_cols and not np.isnan(block).any() and len(block) > 1:
            ascending = name != "enhanced_return"
            frame.loc[mask, "average_rank"] = average_rank(block, ascending=ascending)
    ordered = ["nin", "nout", "metric", "average_rank"] + value_cols
    return frame[[c for c in ordered if c in frame.columns]]


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _load_run(run_dir: Path):
    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest in {run_dir}: {exc}") from exc
    results = pd.read_csv(run_dir / manifest.get("results_file", "results.csv"))
    return manifest, results


def _run_selections(run_dir: Path) -> dict:
    """(K, cardinality) -> frozenset of asset ids, read from selections/."""
    out = {}
    for path in sorted(Path(run_dir).glob("selections/period_*.csv")):
        K = int(path.stem.split("_")[1])
        frame = pd.read_csv(path)
        assets = [c for c in frame.columns if c != "cardinality"]
        for row in frame.itertuples(index=False):
            chosen = frozenset(a for a, flag in zip(assets, row[1:]) if flag)
            out[(K, int(row.cardinality))] = chosen
    return out


def _mean_by_cardinality(results: pd.DataFrame, column: str, skip_first=False) -> pd.Series:
    ok = results[results["error"].isna() | (results["error"] == "")]
    if skip_first:
        ok = ok[ok["K"] > 1]
    return ok.groupby("cardinality")[column].mean()


def cmd_report(args) -> int:
    runs = [(_load_run(d), Path(d)) for d in args.runs]
    digests = {m["dataset_digest"] for (m, _), _ in runs}
    if len(digests) > 1:
        raise DataError(f"runs have mismatched dataset digests: {sorted(digests)}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tags = []
    per_metric = {"in_sample_te": [], "out_sample_te": [], "transaction_volume_pa": []}
    for (manifest, results), run_dir in runs:
        tag = manifest["config"]["procedure"]
        tags.append(tag)
        per_metric["in_sample_te"].append(_mean_by_cardinality(results, "in_sample_te"))
        per_metric["out_sample_te"].append(_mean_by_cardinality(results, "out_sample_te"))
        per_metric["transaction_volume_pa"].append(
            _mean_by_cardinality(results, "transaction_volume_pa", skip_first=True)
        )

    common = None
    for series_list in per_metric.values():
        for series in series_list:
            cards = set(series.index)
            common = cards if common is None else common & cards
    common = sorted(common or [])
    rank_cards = [c for c in common if RANK_RANGE[0] <= c <= RANK_RANGE[1]]
    report_cards = [c for c in REPORT_CARDINALITIES if c in common] or common

    table1_rows = []
    for metric, series_list in per_metric.items():
        matrix = np.array([[s[c] for c in rank_cards] for s in series_list])
        ranks = average_rank(matrix, ascending=True) if len(runs) > 1 and rank_cards \
            else np.ones(len(runs))
        for tag, series, rank in zip(tags, series_list, ranks):
            table1_rows.append(
                {"procedure": tag, "metric": metric, "average_rank": round(float(rank), 2),
                 **{c: series[c] for c in report_cards}}
            )
    frame_to_atomic_csv(pd.DataFrame(table1_rows), out_dir / "table1.csv")

    # pairwise selection overlaps, averaged over periods
    if len(runs) > 1:
        selections = {tag: _run_selections(run_dir)
                      for ((m, _), run_dir), tag in zip(runs, tags)}
        overlap_rows = []
        for i in range(len(tags)):
            for j in range(i + 1, len(tags)):
                a, b = tags[i], tags[j]
                row = {"pair": f"{a} vs {b}"}
                for card in report_cards:
                    values = []
                    for key, set_a in selections[a].items():
                        if key[1] != card or key not in selections[b]:
                            continue
                        values.append(overlap_percent(set_a, selections[b][key]))
                    row[card] = float(np.mean(values)) if values else np.nan
                overlap_rows.append(row)
        frame_to_atomic_csv(pd.DataFrame(overlap_rows), out_dir / "table2.csv")

    # yearly TE vs index volatility (only meaningful for 1-year evaluations)
    for (manifest, results), run_dir in runs:
        tag = manifest["config"]["procedure"]
        ok = results[results["error"].isna() | (results["error"] == "")]
        pivot = ok.pivot_table(index="out_year", columns="cardinality",
                               values="out_sample_te")
        vols = ok.groupby("out_year")["out_index_volatility"].first()
        table3 = pivot.copy()
        table3.insert(0, "volatility", vols)
        corr = {"volatility": np.nan}
        for card in pivot.columns:
            paired = pd.concat([pivot[card], vols], axis=1).dropna()
            corr[card] = (
                te_volatility_correlation(paired.iloc[:, 0], paired.iloc[:, 1])
                if len(paired) >= 3 else np.nan
            )
        table3.loc["correlation"] = pd.Series(corr)
        safe_tag = tag.replace("(", "_").replace(")", "").replace("-", "_")
        frame_to_atomic_csv(table3.reset_index(), out_dir / f"table3_{safe_tag}.csv")

    # power-law fit of TE against cardinality
    base = "BE-OLS(n)" if "BE-OLS(n)" in tags else tags[0]
    table4_rows = []
    for scope, column in (("in_sample", "in_sample_te"), ("out_sample", "out_sample_te")):
        records = []
        for (manifest, results), _ in runs:
            tag = manifest["config"]["procedure"]
            ok = results[results["error"].isna() | (results["error"] == "")]
            for row in ok.itertuples(index=False):
                te = getattr(row, column)
                if te > 0:
                    records.append((tag, row.cardinality, te))
        fit = fit_power_law(records, base_procedure=base)
        table4_rows.append(
            {"scope": scope, "n_obs": len(records), "adjusted_r2": fit.adjusted_r2,
             "alpha0": fit.alpha0, "alpha0_p": fit.p_values["alpha0"],
             "alpha1": fit.alpha1, "alpha1_p": fit.p_values["alpha1"],
             **{f"dummy_{p}": c for p, c in fit.dummy_coefficients.items()},
             **{f"dummy_{p}_p": fit.p_values[p] for p in fit.dummy_coefficients}}
        )
    frame_to_atomic_csv(pd.DataFrame(table4_rows), out_dir / "table4.csv")

    # plot-ready long files
    figure2 = []
    figure3 = []
    for (manifest, results), _ in runs:
        tag = manifest["config"]["procedure"]
        ok = results[results["error"].isna() | (results["error"] == "")]
        for row in ok.itertuples(index=False):
            figure2.append({"procedure": tag, "K": row.K, "cardinality": row.cardinality,
                            "in_sample_te": row.in_sample_te,
                            "out_sample_te": row.out_sample_te})
        enh = ok.groupby("cardinality")["enhanced_return"].mean()
        for card, value in enh.items():
            figure3.append({"procedure": tag, "cardinality": card,
                            "mean_enhanced_return": value})
    frame_to_atomic_csv(pd.DataFrame(figure2), out_dir / "figure2.csv")
    frame_to_atomic_csv(pd.DataFrame(figure3), out_dir / "figure3.csv")

    if args.risk_free:
        table7 = ratios_table(runs, args.risk_free)
        frame_to_atomic_csv(table7, out_dir / "table7.csv")

    print(f"report written to {out_dir}")
    return 0


def ratios_table(runs, risk_free_path) -> pd.DataFrame:
    """Sharpe / gain-loss / sortino per cardinality from chained out-of-sample returns."""
    rf = pd.read_csv(risk_free_path)
    if rf.shape[1] < 2:
        raise DataError("risk-free CSV needs date and rate columns")
    rf_dates = pd.to_datetime(rf.iloc[:, 0]).to_numpy(dtype="datetime64[D]")
    rf_rates = pd.to_numeric(rf.iloc[:, 1], errors="coerce").to_numpy(dtype=float)
    keep = ~np.isnan(rf_rates)
    rf_dates, rf_rates = rf_dates[keep], rf_rates[keep]

    rows = []
    for (manifest, _), run_dir in runs:
        tag = manifest["config"]["procedure"]
        returns = pd.read_csv(Path(run_dir) / "returns.csv")
        if returns.empty:
            continue
        returns["date"] = pd.to_datetime(returns["date"])
        for card, group in returns.groupby("cardinality"):
            group = group.sort_values(["K", "date"])
            dates = group["date"].to_numpy(dtype="datetime64[D]")
            daily_rf = align_risk_free(dates, rf_dates, rf_rates)
            y = excess_returns(group["portfolio_return"].to_numpy(), daily_rf)
            rows.append({"procedure": tag, "series": f"portfolio_n{card}",
                         "sharpe": sharpe(y), "gain_loss": gain_loss(y),
                         "sortino": sortino(y)})
        index_group = returns.drop_duplicates(subset=["K", "date"]).sort_values(["K", "date"])
        dates = index_group["date"].to_numpy(dtype="datetime64[D]")
        daily_rf = align_risk_free(dates, rf_dates, rf_rates)
        y = excess_returns(index_group["index_return"].to_numpy(), daily_rf)
        rows.append({"procedure": tag, "series": "index", "sharpe": sharpe(y),
                     "gain_loss": gain_loss(y), "sortino": sortino(y)})
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# convert / selftest
# ---------------------------------------------------------------------------

def derive_membership(panel: PricePanel) -> MembershipCalendar:
    """Membership from first to last present price per asset."""
    intervals = {}
    for j, asset in enumerate(panel.assets):
        present = np.flatnonzero(~np.isnan(panel.prices[:, j]))
        if present.size:
            intervals[asset] = [(panel.dates[present[0]], panel.dates[present[-1]])]
    return MembershipCalendar(intervals)


def cmd_convert(args) -> int:
    panel = load_price_panel(args.input, args.layout)
    out_panel = Path(args.output)
    out_panel.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_panel.with_name(out_panel.name + ".tmp")
    save_price_panel(panel, tmp)
    os.replace(tmp, out_panel)
    if args.membership_in:
        members = load_membership(args.membership_in)
    else:
        members = derive_membership(panel)
    membership_out = args.membership_out or str(out_panel.with_name("membership.csv"))
    tmp = Path(membership_out).with_name(Path(membership_out).name + ".tmp")
    save_membership(members, tmp)
    os.replace(tmp, membership_out)
    print(f"converted {panel.n_dates} dates x {panel.n_assets} assets -> {out_panel}")
    return 0


def cmd_selftest(args) -> int:
    import tempfile as _tempfile

    dataset = tiny_panel()
    with _tempfile.TemporaryDirectory() as tmp:
        panel_path = Path(tmp) / "panel.csv"
        save_price_panel(dataset.panel, panel_path)
        settings = {
            "panel": str(panel_path),
            "direction": "fs",
            "loss": "ols",
            "intercept": "n",
            "nin": "40",
            "nout": "20",
            "cardinalities": "2,3",
            "out_dir": str(Path(tmp) / "run"),
        }
        failed = execute_backtest(settings, Path(settings["out_dir"]))
        results = pd.read_csv(Path(settings["out_dir"]) / "results.csv")
    if failed or results["out_sample_te"].isna().any():
        print("selftest FAILED", file=sys.stderr)
        return 3
    print(f"selftest ok: {len(results)} cells, "
          f"mean out-of-sample TE {results['out_sample_te'].mean():.2f}% p.a.")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def collect_settings(args) -> dict:
    settings = parse_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {
        "panel": getattr(args, "panel", None),
        "membership": getattr(args, "membership", None),
        "nin": getattr(args, "nin", None),
        "nout": getattr(args, "nout", None),
        "direction": getattr(args, "direction", None),
        "loss": getattr(args, "loss", None),
        "intercept": getattr(args, "intercept", None),
        "lambda_annual": getattr(args, "lambda_annual", None),
        "nmax": getattr(args, "nmax", None),
        "cardinalities": getattr(args, "cardinalities", None),
        "penalty_weight": getattr(args, "penalty_weight", None),
        "workers": getattr(args, "workers", None),
        "out_dir": getattr(args, "out_dir", None),
        "nin_grid": getattr(args, "nin_grid", None),
        "nout_grid": getattr(args, "nout_grid", None),
        "lambda_grid": getattr(args, "lambda_grid", None),
    }
    for key, value in overrides.items():
        if value is not None:
            settings[key] = value
    return settings


def _add_run_flags(parser):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--panel", help="canonical panel CSV")
    parser.add_argument("--membership", help="membership calendar CSV")
    parser.add_argument("--nin", help="estimation period (count or label like 3y)")
    parser.add_argument("--nout", help="evaluation period (count or label like 1y)")
    parser.add_argument("--direction", choices=["fs", "be"])
    parser.add_argument("--loss", choices=["ols", "lad"])
    parser.add_argument("--intercept", choices=["c", "n"])
    parser.add_argument("--lambda-annual", dest="lambda_annual", type=float)
    parser.add_argument("--nmax", type=int)
    parser.add_argument("--cardinalities", help="comma-separated list")
    parser.add_argument("--penalty-weight", dest="penalty_weight", type=float)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out-dir", dest="out_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="indextrack",
        description="Cardinality-constrained index tracking backtests",
    )
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a dataset to the canonical panel format")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--layout", default="canonical", choices=["canonical", "wide-dmy"])
    p.add_argument("--membership-in", dest="membership_in")
    p.add_argument("--membership-out", dest="membership_out")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("backtest", help="run one rolling backtest")
    _add_run_flags(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("sweep", help="run the (n_in, n_out, lambda) sensitivity grid")
    _add_run_flags(p)
    p.add_argument("--nin-grid", dest="nin_grid")
    p.add_argument("--nout-grid", dest="nout_grid")
    p.add_argument("--lambda-grid", dest="lambda_grid")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="emit analytics tables from run directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out-dir", dest="out_dir", default="report")
    p.add_argument("--risk-free", dest="risk_free",
                   help="CSV of dates and annual risk-free rates (%% p.a.)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run a quick end-to-end check on synthetic data")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; our contract reserves 2 for data
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except IndexTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
