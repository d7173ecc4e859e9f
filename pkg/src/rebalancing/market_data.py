"""Daily price CSV ingestion and calendar alignment.

Input files follow the Stooq layout ``Date,Open,High,Low,Close[,Volume]``
with ISO dates. Aligned markets use a year-denominated grid with
``dt = 1 / trading_days`` per trading day.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ParseError
from .stochastic_market import Market, TimeGrid

TRADING_DAYS_PER_YEAR = 252

# Stooq serves Polish headers on its .pl site.
_HEADER_ALIASES = {
    "data": "date",
    "otwarcie": "open",
    "najwyzszy": "high",
    "najnizszy": "low",
    "zamkniecie": "close",
    "wolumen": "volume",
}


@dataclass(frozen=True, eq=False)
class RawPriceSeries:
    ticker: str
    dates: tuple
    prices: np.ndarray

    def __len__(self):
        return len(self.dates)


@dataclass
class AlignmentReport:
    start: dt.date
    end: dt.date
    dates: int
    filled: dict = field(default_factory=dict)
    dropped_dates: list = field(default_factory=list)
    ranges: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
            "dates": self.dates,
            "filled": dict(self.filled),
            "dropped_dates": [d.isoformat() for d in self.dropped_dates],
            "ranges": {k: [a.isoformat(), b.isoformat()] for k, (a, b) in self.ranges.items()},
        }


def parse_price_csv(source, ticker: str | None = None, column: str = "close") -> RawPriceSeries:
    """Parse one ticker's daily bars, keeping ``(date, column)`` pairs.

    ``source`` may be a path, a text stream or a binary stream.
    """
    name, text = _read_text(source)
    if ticker is None:
        ticker = Path(name).stem if name else "asset"
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    while header is not None and not any(h.strip() for h in header):
        header = next(rows, None)
    if header is None:
        raise ParseError("empty price file", source=name)
    keys = [_HEADER_ALIASES.get(h.strip().lower(), h.strip().lower()) for h in header]
    column = column.lower()
    if "date" not in keys or column not in keys:
        raise ParseError(f"header must contain Date and {column.title()}, got {header}", source=name, line=1)
    date_at, price_at = keys.index("date"), keys.index(column)

    dates, prices = [], []
    for line, row in enumerate(rows, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) <= max(date_at, price_at):
            raise ParseError(f"expected {len(keys)} fields, got {len(row)}", source=name, line=line)
        try:
            day = dt.date.fromisoformat(row[date_at].strip())
        except ValueError:
            raise ParseError(f"bad date {row[date_at]!r}", source=name, line=line) from None
        try:
            price = float(row[price_at])
        except ValueError:
            raise ParseError(f"bad price {row[price_at]!r}", source=name, line=line) from None
        if not price > 0 or not np.isfinite(price):
            raise ParseError(f"price must be positive, got {price!r}", source=name, line=line)
        if dates and day <= dates[-1]:
            raise ParseError(f"dates must be strictly increasing ({day} after {dates[-1]})", source=name, line=line)
        dates.append(day)
        prices.append(price)
    if not dates:
        raise ParseError("no observations", source=name)
    return RawPriceSeries(ticker, tuple(dates), np.array(prices))


def _read_text(source):
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            data = fh.read()
        name = str(source)
    else:
        data = source.read()
        name = getattr(source, "name", None)
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return name, data


def load_directory(directory, column: str = "close") -> list:
    """Parse every ``*.csv`` in ``directory``; ticker = file stem."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigurationError(f"data directory not found: {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".csv")
    if not files:
        raise ConfigurationError(f"no CSV files in {directory}")
    return [parse_price_csv(p, p.stem, column) for p in files]


def align_calendars(series, trading_days: int = TRADING_DAYS_PER_YEAR):
    """Put all series on the shared trading calendar.

    The window runs from the latest first date to the earliest last date.
    Inside it, every date seen in any series is kept and a series without a
    quote that day carries its previous close forward.
    """
    series = list(series)
    if not series:
        raise ConfigurationError("no price series to align")
    tickers = [s.ticker for s in series]
    if len(set(tickers)) != len(tickers):
        raise ConfigurationError("duplicate tickers")
    if trading_days < 1:
        raise ConfigurationError("trading_days must be >= 1")
    ranges = {s.ticker: (s.dates[0], s.dates[-1]) for s in series}
    start = max(a for a, _ in ranges.values())
    end = min(b for _, b in ranges.values())
    if start > end:
        listed = ", ".join(f"{k}: {a}..{b}" for k, (a, b) in ranges.items())
        raise ConfigurationError(f"price series do not overlap ({listed})")

    every = sorted(set().union(*(s.dates for s in series)))
    calendar = [d for d in every if start <= d <= end]
    dropped = [d for d in every if not start <= d <= end]
    if len(calendar) < 2:
        raise ConfigurationError("aligned calendar has fewer than two dates")

    columns, filled = [], {}
    for s in series:
        lookup = dict(zip(s.dates, s.prices))
        position = np.searchsorted(np.array(s.dates, dtype="datetime64[D]"), np.array(calendar, dtype="datetime64[D]"), side="right") - 1
        # position >= 0 everywhere because start is no earlier than this series' first date.
        columns.append(s.prices[position])
        filled[s.ticker] = sum(1 for d in calendar if d not in lookup)

    grid = TimeGrid(dt=1.0 / trading_days, steps=len(calendar) - 1)
    market = Market(grid, np.column_stack(columns), tuple(tickers))
    report = AlignmentReport(start, end, len(calendar), filled, dropped, ranges)
    return market, report
