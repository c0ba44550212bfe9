"""Daily prices to weekly log-returns, realized variance and summary statistics.

Weekly returns are anchored on Wednesday closes, with Thursday used when the
Wednesday is missing. A week with neither is folded into the following week:
the return telescopes across the gap and realized variance keeps accumulating.
All returns are continuously compounded and scaled by 100.
"""
from __future__ import annotations

import bisect
import csv
import datetime as dt
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

WEEKDAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]


class DataError(ValueError):
    """Raised for unreadable, empty or inconsistent input data."""


@dataclass(frozen=True)
class DailyBar:
    date: dt.date
    adjusted_close: float


@dataclass(frozen=True)
class DailySeries:
    """Ordered, de-duplicated daily values plus ingest bookkeeping."""

    bars: tuple
    duplicates: int = 0
    dropped: int = 0

    def __len__(self):
        return len(self.bars)

    @property
    def dates(self):
        return [b.date for b in self.bars]

    @property
    def values(self):
        return np.array([b.adjusted_close for b in self.bars], dtype=float)


@dataclass(frozen=True)
class WeeklyObservation:
    anchor_date: dt.date
    log_return: float
    realized_variance: float
    risk_free: float = 0.0


@dataclass(frozen=True)
class ReturnSeries:
    """Weekly return series stored column-wise.

    ``observations`` rebuilds the row view on demand; numerical code works on
    the arrays directly.
    """

    dates: tuple
    log_return: np.ndarray
    realized_variance: np.ndarray
    risk_free: np.ndarray = field(default=None)

    def __post_init__(self):
        r = np.asarray(self.log_return, dtype=float)
        rv = np.asarray(self.realized_variance, dtype=float)
        rf = np.zeros_like(r) if self.risk_free is None else np.asarray(self.risk_free, dtype=float)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "log_return", r)
        object.__setattr__(self, "realized_variance", rv)
        object.__setattr__(self, "risk_free", rf)
        n = len(self.dates)
        if not (len(r) == len(rv) == len(rf) == n):
            raise DataError("column lengths differ")
        if not np.all(np.isfinite(r)):
            raise DataError("non-finite log return")
        if np.any(rv < 0):
            raise DataError("negative realized variance")
        for a, b in zip(self.dates, self.dates[1:]):
            if not b > a:
                raise DataError(f"anchor dates not strictly increasing at {b}")

    @classmethod
    def from_observations(cls, observations: Iterable[WeeklyObservation]) -> "ReturnSeries":
        obs = list(observations)
        return cls(
            dates=[o.anchor_date for o in obs],
            log_return=[o.log_return for o in obs],
            realized_variance=[o.realized_variance for o in obs],
            risk_free=[o.risk_free for o in obs],
        )

    @classmethod
    def from_returns(cls, returns, start=dt.date(2000, 1, 5)) -> "ReturnSeries":
        """Wrap a bare return array with synthetic weekly dates (simulation, tests)."""
        r = np.asarray(returns, dtype=float)
        dates = [start + dt.timedelta(weeks=i) for i in range(len(r))]
        return cls(dates=dates, log_return=r, realized_variance=r**2)

    @property
    def observations(self):
        return [
            WeeklyObservation(d, float(r), float(v), float(f))
            for d, r, v, f in zip(self.dates, self.log_return, self.realized_variance, self.risk_free)
        ]

    def __len__(self):
        return len(self.dates)

    def __getitem__(self, key):
        if not isinstance(key, slice):
            raise TypeError("ReturnSeries supports slicing only")
        return ReturnSeries(
            self.dates[key], self.log_return[key], self.realized_variance[key], self.risk_free[key]
        )

    def index_of(self, date: dt.date) -> int:
        """Index of the first anchor on or after ``date``."""
        for i, d in enumerate(self.dates):
            if d >= date:
                return i
        return len(self.dates)

    def between(self, start: dt.date, end: dt.date) -> "ReturnSeries":
        return self[self.index_of(start) : self.index_of(end + dt.timedelta(days=1))]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update("|".join(d.isoformat() for d in self.dates).encode())
        h.update(self.log_return.tobytes())
        return h.hexdigest()[:16]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["anchor_date", "log_return", "realized_variance", "risk_free"])
            for o in self.observations:
                w.writerow([o.anchor_date.isoformat(), repr(o.log_return), repr(o.realized_variance), repr(o.risk_free)])

    @classmethod
    def from_csv(cls, path) -> "ReturnSeries":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"cannot read weekly series: {path}")
        obs = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                obs.append(
                    WeeklyObservation(
                        dt.date.fromisoformat(row["anchor_date"]),
                        float(row["log_return"]),
                        float(row["realized_variance"]),
                        float(row.get("risk_free") or 0.0),
                    )
                )
        if not obs:
            raise DataError(f"no valid rows in {path}")
        return cls.from_observations(obs)


def _parse_float(text):
    if text is None:
        return None
    text = text.strip()
    if text == "" or text.lower() in {"nan", "null", "na", "n/a", "."}:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_daily_prices(
    path,
    date_column: str = "date",
    price_column: str = "adjusted_close",
    require_positive: bool = True,
) -> DailySeries:
    """Read a (date, value) CSV into an ordered, de-duplicated daily series.

    Rows with a missing or unparsable value are dropped and counted. A date
    that appears twice with the same value is kept once and counted as a
    duplicate; conflicting duplicates raise :class:`DataError`.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    rows = {}
    dropped = duplicates = 0
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"no valid rows in {path}")
        missing = {date_column, price_column} - set(reader.fieldnames)
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            try:
                day = dt.date.fromisoformat(row[date_column].strip()[:10])
            except (ValueError, AttributeError):
                dropped += 1
                continue
            price = _parse_float(row[price_column])
            if price is None or (require_positive and price <= 0):
                dropped += 1
                continue
            if day in rows:
                if rows[day] != price:
                    raise DataError(f"{path}: conflicting duplicate rows for {day}")
                duplicates += 1
                continue
            rows[day] = price
    if not rows:
        raise DataError(f"no valid rows in {path}")
    bars = tuple(DailyBar(d, rows[d]) for d in sorted(rows))
    return DailySeries(bars, duplicates=duplicates, dropped=dropped)


def _anchor_indices(dates: Sequence[dt.date], anchor: str):
    first = WEEKDAYS.index(anchor)
    fallback = first + 1
    weeks = {}
    for i, d in enumerate(dates):
        weeks.setdefault(d.isocalendar()[:2], {})[d.weekday()] = i
    out = []
    for days in weeks.values():
        if first in days:
            out.append(days[first])
        elif fallback in days:
            out.append(days[fallback])
    return sorted(out)


def _risk_free_span(rf_dates, rf_values, start: dt.date, end: dt.date) -> float:
    """Weekly log risk-free return x100 over calendar days [start, end).

    The annual yield (percent) in force on each calendar day is the latest
    quote on or before that day.
    """
    if rf_dates is None or len(rf_dates) == 0:
        return 0.0
    total = 0.0
    day = start
    while day < end:
        k = bisect.bisect_right(rf_dates, day) - 1
        if k >= 0:
            total += math.log1p(rf_values[k] / 100.0) / 365.0
        day += dt.timedelta(days=1)
    return 100.0 * total


def build_weekly_series(
    daily: DailySeries,
    rf_daily: Optional[DailySeries] = None,
    anchor: str = "wednesday",
) -> ReturnSeries:
    """Aggregate daily closes into weekly anchored returns and realized variance.

    ``anchor`` names the preferred weekday; the following weekday is the
    fallback when the preferred day is missing from a week.
    """
    anchor = anchor.lower()
    if anchor not in WEEKDAYS[:5]:
        raise ValueError(f"anchor must be a weekday name, got {anchor!r}")
    dates = daily.dates
    logp = np.log(daily.values)
    idx = _anchor_indices(dates, anchor)
    if len(idx) < 2:
        raise DataError("fewer than 2 anchor days; cannot form a weekly return")
    daily_ret = 100.0 * np.diff(logp)
    rf_dates = rf_vals = None
    if rf_daily is not None and len(rf_daily):
        rf_dates = rf_daily.dates
        rf_vals = rf_daily.values

    obs = []
    for a, b in zip(idx, idx[1:]):
        r = 100.0 * (logp[b] - logp[a])
        seg = daily_ret[a:b]
        rv = float(np.dot(seg, seg))
        rf = _risk_free_span(rf_dates, rf_vals, dates[a], dates[b])
        obs.append(WeeklyObservation(dates[b], float(r), rv, rf))
    return ReturnSeries.from_observations(obs)


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    mean_rv_sqrt: float
    skewness: float
    excess_kurtosis: float

    def as_dict(self):
        return {
            "count": self.count,
            "mean": self.mean,
            "mean_rv_sqrt": self.mean_rv_sqrt,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
        }


def summary_stats(series: ReturnSeries) -> SummaryStats:
    """Count, mean, mean of sqrt(RV), skewness and excess kurtosis.

    Moments are population (1/N) moments standardized by the population
    variance.
    """
    r = series.log_return
    n = len(r)
    if n < 4:
        raise DataError(f"need at least 4 observations for summary statistics, got {n}")
    mean = float(r.mean())
    d = r - mean
    m2 = float(np.mean(d**2))
    if m2 == 0.0 or np.all(r == r[0]):
        raise DataError("zero return variance; skewness and kurtosis are undefined")
    skew = float(np.mean(d**3) / m2**1.5)
    kurt = float(np.mean(d**4) / m2**2 - 3.0)
    return SummaryStats(n, mean, float(np.mean(np.sqrt(series.realized_variance))), skew, kurt)
