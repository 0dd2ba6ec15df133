"""
Market data - daily OHLC ingestion, synthesis, labelling and splitting
----------------------------------------------------------------------

INPUT FORMAT (CSV):
-------------------
Date,Open,High,Low,Close[,Adj Close],Volume
2021-01-04,100.0,101.5,99.2,101.0,1204300

`Adj Close` is accepted and ignored. Dates are YYYY-MM-DD, decimal point '.',
no thousands separators.

HTTP FETCH:
-----------
GET <endpoint>/<symbol>?start=YYYY-MM-DD&end=YYYY-MM-DD returning the same CSV.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime
from typing import List, NamedTuple, Tuple

import numpy as np
import pandas as pd
import requests

from src.helpers.constants import (
    DATE_FORMAT,
    FETCH_TIMEOUT_SECONDS,
    OHLC_HEADER,
    OHLC_OPTIONAL_COLUMNS,
    OHLC_REQUIRED_COLUMNS,
    SYNTH_START,
)
from src.helpers.errors import (
    DatasetError,
    EmptyPayloadError,
    FetchNetworkError,
    FetchStatusError,
    OhlcFormatError,
    SymbolNotFoundError,
)

logger = logging.getLogger(__name__)


class OhlcRow(NamedTuple):
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: int


@dataclass(frozen=True)
class OhlcSeries:
    symbol: str
    rows: Tuple[OhlcRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        for number, row in enumerate(self.rows, start=1):
            _check_row(row, number)
            if number > 1 and row.date <= self.rows[number - 2].date:
                raise OhlcFormatError(f"non-increasing date {row.date.isoformat()} at row {number}")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def dates(self) -> List[date]:
        return [row.date for row in self.rows]

    @property
    def opens(self) -> np.ndarray:
        return np.array([row.open for row in self.rows], dtype=float)

    @property
    def highs(self) -> np.ndarray:
        return np.array([row.high for row in self.rows], dtype=float)

    @property
    def lows(self) -> np.ndarray:
        return np.array([row.low for row in self.rows], dtype=float)

    @property
    def closes(self) -> np.ndarray:
        return np.array([row.close for row in self.rows], dtype=float)

    @property
    def volumes(self) -> np.ndarray:
        return np.array([row.volume for row in self.rows], dtype=np.int64)


def _check_row(row: OhlcRow, number: int):
    prices = (row.open, row.high, row.low, row.close)
    if not all(math.isfinite(p) for p in prices):
        raise OhlcFormatError(f"non-finite price at row {number}")
    if min(prices) <= 0:
        raise OhlcFormatError(f"non-positive price at row {number}")
    if row.volume < 0:
        raise OhlcFormatError(f"negative volume at row {number}")
    if row.low > row.high:
        raise OhlcFormatError(f"low exceeds high at row {number}")
    if row.low > min(row.open, row.close):
        raise OhlcFormatError(f"low exceeds open/close at row {number}")
    if row.high < max(row.open, row.close):
        raise OhlcFormatError(f"high below open/close at row {number}")


def _parse_number(text: str, column: str, number: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise OhlcFormatError(f"malformed number '{text}' in column {column} at row {number}") from None
    return value


def _read_rows(text: str) -> List[OhlcRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header:
        raise OhlcFormatError("missing header row")
    header = [column.strip() for column in header]
    missing = [column for column in OHLC_REQUIRED_COLUMNS if column not in header]
    if missing:
        raise OhlcFormatError(f"missing required column {', '.join(missing)}")
    index = {column: header.index(column) for column in OHLC_REQUIRED_COLUMNS}
    discarded = [column for column in header if column in OHLC_OPTIONAL_COLUMNS]
    if discarded:
        logger.debug("Discarding column %s", ", ".join(discarded))

    rows = []
    for number, fields in enumerate(reader, start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) < len(header):
            raise OhlcFormatError(f"expected {len(header)} fields, found {len(fields)} at row {number}")
        raw_date = fields[index["Date"]].strip()
        try:
            day = datetime.strptime(raw_date, DATE_FORMAT).date()
        except ValueError:
            raise OhlcFormatError(f"malformed date '{raw_date}' at row {number}") from None
        values = {
            column: _parse_number(fields[index[column]].strip(), column, number)
            for column in ("Open", "High", "Low", "Close", "Volume")
        }
        volume = values["Volume"]
        if not math.isfinite(volume) or volume != int(volume):
            raise OhlcFormatError(f"malformed number '{fields[index['Volume']]}' in column Volume at row {number}")
        row = OhlcRow(day, values["Open"], values["High"], values["Low"], values["Close"], int(volume))
        _check_row(row, number)
        rows.append(row)
    return rows


def parse_ohlc_csv(text: str, symbol: str = "") -> OhlcSeries:
    """
    Parses the canonical OHLC CSV. Rows must already be in strictly increasing date order.
    """
    rows = _read_rows(text)
    for number in range(1, len(rows)):
        if rows[number].date <= rows[number - 1].date:
            raise OhlcFormatError(f"non-increasing date {rows[number].date.isoformat()} at row {number + 1}")
    series = OhlcSeries(symbol, rows)
    logger.info("Parsed %d rows for %s", len(series), symbol or "<unnamed>")
    return series


def serialize_ohlc_csv(series: OhlcSeries) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(OHLC_HEADER)
    for row in series.rows:
        writer.writerow([row.date.strftime(DATE_FORMAT), repr(row.open), repr(row.high),
                         repr(row.low), repr(row.close), row.volume])
    return buffer.getvalue()


def fetch_ohlc(symbol: str, start: date, end: date, endpoint: str,
               timeout: float = FETCH_TIMEOUT_SECONDS) -> OhlcSeries:
    """
    Downloads daily rows for `symbol` from a chart endpoint serving the CSV schema above.
    Rows are re-sorted by date and restricted to [start, end].
    """
    if not symbol or not symbol.strip():
        raise ValueError("symbol must be a non-empty string")
    if start >= end:
        raise ValueError(f"start ({start.isoformat()}) must be before end ({end.isoformat()})")

    url = f"{endpoint.rstrip('/')}/{symbol.strip()}"
    params = {"start": start.strftime(DATE_FORMAT), "end": end.strftime(DATE_FORMAT)}
    try:
        response = requests.get(url, params=params, timeout=timeout)
    except requests.RequestException as exc:
        raise FetchNetworkError(f"network failure fetching {symbol}: {exc}") from exc

    if response.status_code == 404:
        raise SymbolNotFoundError(f"symbol not found: {symbol}")
    if response.status_code != 200:
        raise FetchStatusError(response.status_code, f"HTTP {response.status_code} fetching {symbol}")
    if not response.text.strip():
        raise EmptyPayloadError(f"empty payload for {symbol}")

    rows = sorted(_read_rows(response.text), key=lambda row: row.date)
    rows = [row for row in rows if start <= row.date <= end]
    if not rows:
        raise EmptyPayloadError(f"no rows for {symbol} between {params['start']} and {params['end']}")
    series = OhlcSeries(symbol.strip(), rows)
    logger.info("Fetched %d rows for %s", len(series), series.symbol)
    return series


def generate_gbm_series(n_days: int, s0: float = 100.0, drift: float = 0.0, volatility: float = 0.01,
                        seed: int = 0, symbol: str = "SYNTH", momentum: float = 0.0,
                        range_factor: float = 0.005, start: date = SYNTH_START) -> OhlcSeries:
    """
    Geometric Brownian motion closes on business days. With momentum != 0 the daily
    log-return innovations follow an AR(1) process with that coefficient.
    """
    if n_days < 2:
        raise ValueError(f"n_days must be at least 2, got {n_days}")
    if not s0 > 0:
        raise ValueError(f"s0 must be positive, got {s0}")
    if volatility < 0:
        raise ValueError(f"volatility must be non-negative, got {volatility}")
    if not -1.0 < momentum < 1.0:
        raise ValueError(f"momentum must lie in (-1, 1), got {momentum}")
    if not 0 <= range_factor < 1:
        raise ValueError(f"range_factor must lie in [0, 1), got {range_factor}")

    rng = np.random.default_rng(seed)
    shocks = rng.standard_normal(n_days - 1)
    spread = rng.random((n_days, 2))
    volumes = rng.integers(100_000, 5_000_000, size=n_days)

    mean_return = drift - 0.5 * volatility ** 2
    log_returns = np.empty(n_days - 1)
    previous = 0.0
    for t in range(n_days - 1):
        previous = momentum * previous + volatility * shocks[t]
        log_returns[t] = mean_return + previous
    closes = s0 * np.exp(np.concatenate(([0.0], np.cumsum(log_returns))))
    opens = np.concatenate(([s0], closes[:-1]))

    highs = np.maximum(opens, closes) * (1.0 + range_factor * spread[:, 0])
    lows = np.minimum(opens, closes) * (1.0 - range_factor * spread[:, 1])
    days = pd.bdate_range(start=start, periods=n_days)

    rows = [
        OhlcRow(days[t].date(), float(opens[t]), float(highs[t]), float(lows[t]), float(closes[t]), int(volumes[t]))
        for t in range(n_days)
    ]
    return OhlcSeries(symbol, rows)


def make_labels(series: OhlcSeries) -> np.ndarray:
    """Change label: 1 where close[T] < close[T+1], else 0. The final day has no label."""
    if len(series) < 2:
        raise DatasetError(f"need at least 2 rows to label, got {len(series)}")
    closes = series.closes
    return (closes[:-1] < closes[1:]).astype(np.int8)


def chronological_split(dataset, test_fraction: float):
    """Last ceil(test_fraction * n) rows become the test partition; order is kept."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(dataset)
    n_test = math.ceil(test_fraction * n)
    n_train = n - n_test
    if n_train <= 0:
        raise DatasetError("empty train partition")
    if n_test <= 0:
        raise DatasetError("empty test partition")
    return dataset.take(0, n_train), dataset.take(n_train, n)

