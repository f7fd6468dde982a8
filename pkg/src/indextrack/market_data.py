"""Price panels, membership calendars, log returns and rolling window schedules.

The canonical on-disk panel format is a wide CSV: first column ``date``
(YYYY-MM-DD), one column per asset, and a column named ``index`` for the
tracked index level.  Empty cells are missing prices.  Membership
calendars are CSVs with columns ``asset,start,end`` (empty ``end`` means
open-ended).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, EmptyUniverseWarning

TRADING_DAYS_PER_YEAR = 252

INDEX_COLUMN = "index"

# Observation counts for the period labels used in configs.  The yearly
# counts follow the dataset's actual trading-day density (a 3-year
# estimation window holds ~754 daily returns).
PERIOD_LABELS = {
    "3m": 63,
    "6m": 126,
    "1y": 251,
    "2y": 503,
    "3y": 754,
    "4y": 1006,
}


def resolve_period(value) -> int:
    """Turn a period label ('3y', '6m', ...) or a raw count into a count."""
    if isinstance(value, int):
        return value
    text = str(value).strip().lower()
    if text in PERIOD_LABELS:
        return PERIOD_LABELS[text]
    try:
        return int(text)
    except ValueError:
        raise ConfigError(
            f"unknown period {value!r}: use a count or one of {sorted(PERIOD_LABELS)}"
        ) from None


@dataclass(frozen=True)
class PricePanel:
    """Dated price matrix plus the index level series.

    ``prices`` is (dates x assets) with NaN for missing; ``index_values``
    is dense and strictly positive.  Immutable after construction.
    """

    dates: np.ndarray  # datetime64[D], strictly increasing
    assets: tuple
    prices: np.ndarray  # float, NaN = missing
    index_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", np.asarray(self.dates, dtype="datetime64[D]"))
        object.__setattr__(self, "assets", tuple(self.assets))
        prices = np.asarray(self.prices, dtype=float)
        index_values = np.asarray(self.index_values, dtype=float)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "index_values", index_values)
        validate_panel(self)
        self.prices.setflags(write=False)
        self.index_values.setflags(write=False)
        self.dates.setflags(write=False)

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def n_observations(self) -> int:
        """Number of return observations (one fewer than dates)."""
        return len(self.dates) - 1

    def asset_column(self, asset: str) -> int:
        try:
            return self.assets.index(asset)
        except ValueError:
            raise DataError(f"unknown asset {asset!r}") from None

    def index_log_returns(self) -> np.ndarray:
        """Daily log returns of the index, aligned to dates[1:]."""
        return np.diff(np.log(self.index_values))

    def asset_log_returns(self) -> np.ndarray:
        """(n_observations x n_assets) log-return matrix, NaN where a price is missing."""
        logp = np.log(self.prices)
        return logp[1:] - logp[:-1]


def validate_panel(panel: PricePanel) -> None:
    dates, prices, index_values = panel.dates, panel.prices, panel.index_values
    if prices.shape != (len(dates), len(panel.assets)):
        raise DataError(
            f"price matrix shape {prices.shape} does not match "
            f"{len(dates)} dates x {len(panel.assets)} assets"
        )
    if index_values.shape != (len(dates),):
        raise DataError("index series length does not match dates")
    if len(dates) == 0:
        raise DataError("empty panel")
    if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
        bad = int(np.argmax(np.diff(dates) <= np.timedelta64(0, "D")))
        raise DataError(f"dates not strictly increasing at row {bad + 1}")
    if np.any(~np.isfinite(index_values)) or np.any(index_values <= 0):
        bad = int(np.argmax(~(np.isfinite(index_values) & (index_values > 0))))
        raise DataError(f"non-positive or missing index value at row {bad} ({dates[bad]})")
    present = ~np.isnan(prices)
    if np.any(present & ~(prices > 0)):
        rows, cols = np.where(present & ~(prices > 0))
        raise DataError(
            f"non-positive price at row {rows[0]} ({dates[rows[0]]}), "
            f"column {panel.assets[cols[0]]!r}"
        )


def load_price_panel(path, fmt: str = "canonical") -> PricePanel:
    """Load a panel CSV.

    ``fmt`` selects the date layout: ``canonical`` expects YYYY-MM-DD,
    ``wide-dmy`` expects day-first dates (the public-dataset convention,
    e.g. ``3/1/2005``).  Both layouts are wide CSVs with an ``index``
    column.
    """
    if fmt not in ("canonical", "wide-dmy"):
        raise ConfigError(f"unknown panel format {fmt!r}")
    try:
        frame = pd.read_csv(path, dtype=str)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read panel {path}: {exc}") from exc
    if frame.shape[1] < 2:
        raise DataError(f"panel {path} needs a date column plus data columns")
    date_col = frame.columns[0]
    dayfirst = fmt == "wide-dmy"
    try:
        dates = pd.to_datetime(frame[date_col], dayfirst=dayfirst, format="mixed").to_numpy(
            dtype="datetime64[D]"
        )
    except (ValueError, TypeError) as exc:
        raise DataError(f"malformed date in column {date_col!r}: {exc}") from exc
    if len(np.unique(dates)) != len(dates):
        values, counts = np.unique(dates, return_counts=True)
        raise DataError(f"duplicate date {values[np.argmax(counts > 1)]}")
    if INDEX_COLUMN not in frame.columns:
        raise DataError(f"panel {path} is missing the {INDEX_COLUMN!r} column")
    assets = [c for c in frame.columns[1:] if c != INDEX_COLUMN]

    def parse_numeric(col, allow_missing):
        raw = frame[col]
        values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        blank = raw.isna() | (raw.astype(str).str.strip() == "")
        bad = np.isnan(values) & ~blank.to_numpy()
        if bad.any():
            row = int(np.argmax(bad))
            raise DataError(f"unparseable value at row {row}, column {col!r}")
        if not allow_missing and np.isnan(values).any():
            row = int(np.argmax(np.isnan(values)))
            raise DataError(f"missing index value at row {row} ({dates[row]})")
        return values

    index_values = parse_numeric(INDEX_COLUMN, allow_missing=False)
    prices = np.column_stack([parse_numeric(a, allow_missing=True) for a in assets]) if assets else np.empty((len(dates), 0))
    return PricePanel(dates=dates, assets=assets, prices=prices, index_values=index_values)


def save_price_panel(panel: PricePanel, path) -> None:
    """Write the canonical wide CSV (load o save round-trips exactly)."""
    columns = {"date": [str(d) for d in panel.dates]}
    for j, asset in enumerate(panel.assets):
        col = panel.prices[:, j]
        columns[asset] = ["" if math.isnan(v) else format(v, ".12g") for v in col]
    columns[INDEX_COLUMN] = [format(v, ".12g") for v in panel.index_values]
    pd.DataFrame(columns).to_csv(path, index=False)


@dataclass(frozen=True)
class MembershipCalendar:
    """Per-asset date intervals of index membership.

    Intervals are (start, end) with ``None`` for open endpoints; per asset
    they are disjoint and sorted.
    """

    intervals: dict = field(default_factory=dict)

    def __post_init__(self):
        cleaned = {}
        for asset, spans in self.intervals.items():
            spans = sorted(
                (
                    (None if s is None else np.datetime64(s, "D"),
                     None if e is None else np.datetime64(e, "D"))
                    for s, e in spans
                ),
                key=lambda se: (se[0] is not None, se[0]),
            )
            prev_end = None
            for start, end in spans:
                if start is not None and end is not None and end < start:
                    raise DataError(f"membership interval for {asset!r} ends before it starts")
                if prev_end is not None and start is not None and start <= prev_end:
                    raise DataError(f"overlapping membership intervals for {asset!r}")
                prev_end = end if end is not None else np.datetime64("9999-12-31", "D")
            cleaned[asset] = tuple(spans)
        object.__setattr__(self, "intervals", cleaned)

    @classmethod
    def always(cls, assets) -> "MembershipCalendar":
        """Every asset a member for all time."""
        return cls({a: [(None, None)] for a in assets})

    def is_member(self, asset: str, date) -> bool:
        date = np.datetime64(date, "D")
        for start, end in self.intervals.get(asset, ()):
            if (start is None or start <= date) and (end is None or date <= end):
                return True
        return False


def load_membership(path) -> MembershipCalendar:
    try:
        frame = pd.read_csv(path, dtype=str)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read membership {path}: {exc}") from exc
    required = {"asset", "start", "end"}
    if not required.issubset(frame.columns):
        raise DataError(f"membership {path} needs columns {sorted(required)}")
    intervals: dict = {}
    for row in frame.itertuples(index=False):
        start = None if pd.isna(row.start) or str(row.start).strip() == "" else str(row.start).strip()
        end = None if pd.isna(row.end) or str(row.end).strip() == "" else str(row.end).strip()
        try:
            start = None if start is None else np.datetime64(start, "D")
            end = None if end is None else np.datetime64(end, "D")
        except ValueError as exc:
            raise DataError(f"malformed membership date for {row.asset!r}: {exc}") from exc
        intervals.setdefault(str(row.asset), []).append((start, end))
    return MembershipCalendar(intervals)


def save_membership(calendar: MembershipCalendar, path) -> None:
    rows = []
    for asset in sorted(calendar.intervals):
        for start, end in calendar.intervals[asset]:
            rows.append(
                {
                    "asset": asset,
                    "start": "" if start is None else str(start),
                    "end": "" if end is None else str(end),
                }
            )
    pd.DataFrame(rows, columns=["asset", "start", "end"]).to_csv(path, index=False)


def log_return(p_now: float, p_prev: float) -> float:
    """ln(p_now / p_prev); both prices must be strictly positive."""
    if not (p_now > 0 and p_prev > 0):
        raise DataError(f"log return needs positive prices, got ({p_now}, {p_prev})")
    return math.log(p_now / p_prev)


@dataclass(frozen=True)
class WindowSchedule:
    """Rolling (in-sample, out-of-sample) windows over 1-based return observations.

    Period K uses observations [(K-1)*n_out + 1, (K-1)*n_out + n_in] for
    selection and the following n_out observations for evaluation, so
    consecutive evaluation windows tile the horizon without overlap.
    """

    n_in: int
    n_out: int
    windows: tuple  # of (K, (in_lo, in_hi), (out_lo, out_hi)), 1-based inclusive

    def __len__(self):
        return len(self.windows)


def window_schedule(total_observations: int, n_in: int, n_out: int) -> WindowSchedule:
    if n_in < 2 or n_out < 1:
        raise ConfigError(f"need n_in >= 2 and n_out >= 1, got ({n_in}, {n_out})")
    if total_observations < n_in + n_out:
        raise ConfigError(
            f"insufficient data: {total_observations} observations < n_in + n_out = {n_in + n_out}"
        )
    n_periods = (total_observations - n_in) // n_out
    windows = []
    for k in range(1, n_periods + 1):
        in_lo = (k - 1) * n_out + 1
        in_hi = (k - 1) * n_out + n_in
        windows.append((k, (in_lo, in_hi), (in_hi + 1, in_hi + n_out)))
    return WindowSchedule(n_in=n_in, n_out=n_out, windows=tuple(windows))


def observation_price_rows(obs_range) -> tuple:
    """Price-row span (0-based, inclusive) backing a 1-based observation range.

    Observation t is the return from price row t-1 to price row t.
    """
    lo, hi = obs_range
    return lo - 1, hi


def eligible_universe(panel: PricePanel, members: MembershipCalendar, in_range,
                      rebalance_date=None) -> list:
    """Assets selectable at a rebalance.

    Keeps assets that are index members at the rebalance date (the last
    in-sample date by default) and have a present price at every date
    backing the in-sample observation range.  Returns asset ids in panel
    order; warns (EmptyUniverseWarning) if nothing qualifies.
    """
    row_lo, row_hi = observation_price_rows(in_range)
    if row_lo < 0 or row_hi >= panel.n_dates:
        raise ConfigError(f"observation range {in_range} outside panel")
    if rebalance_date is None:
        rebalance_date = panel.dates[row_hi]
    window_prices = panel.prices[row_lo:row_hi + 1]
    complete = ~np.isnan(window_prices).any(axis=0)
    out = [
        asset
        for j, asset in enumerate(panel.assets)
        if complete[j] and members.is_member(asset, rebalance_date)
    ]
    if not out:
        warnings.warn(
            f"empty eligible universe at {rebalance_date}", EmptyUniverseWarning, stacklevel=2
        )
    return out


def annualized_volatility(returns) -> float:
    """100 * sqrt(252) * sample standard deviation of daily log returns."""
    returns = np.asarray(returns, dtype=float)
    if returns.size < 2:
        raise DataError("volatility needs at least 2 observations")
    return 100.0 * math.sqrt(TRADING_DAYS_PER_YEAR) * float(np.std(returns, ddof=1))
