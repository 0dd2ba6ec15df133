"""
Technical indicators and the canonical feature matrix.

Every indicator returns an IndicatorSeries the same length as its input, with the
first `warm_up` entries undefined (NaN) and every later entry finite.

Canonical feature set (fixed order):
    sma_10, sma_20, ema_10, ema_20, rsi_14, macd_line, macd_signal, macd_hist,
    stoch_k, stoch_d, atr_14, aroon_up, aroon_down
"""

import logging
from dataclasses import dataclass
from datetime import date
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from src.helpers.constants import (
    ANGLE_MAX,
    AROON_WINDOW,
    ATR_WINDOW,
    CANONICAL_FEATURES,
    EMA_WINDOWS,
    MACD_FAST,
    MACD_SIGNAL,
    MACD_SLOW,
    MIN_DATASET_ROWS,
    RSI_WINDOW,
    SMA_WINDOWS,
    STOCH_D_WINDOW,
    STOCH_K_WINDOW,
)
from src.helpers.errors import DatasetError
from src.helpers.selection_enum import ScalerKind
from src.market_data import OhlcSeries, make_labels

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndicatorSeries:
    name: str
    values: np.ndarray
    warm_up: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if not np.all(np.isnan(values[: self.warm_up])) or not np.all(np.isfinite(values[self.warm_up:])):
            raise ValueError(f"{self.name}: expected exactly {self.warm_up} leading undefined entries")

    def __len__(self) -> int:
        return len(self.values)


def _as_prices(values) -> np.ndarray:
    return np.asarray(values, dtype=float)


def _check_window(window: int, name: str = "window"):
    if not isinstance(window, (int, np.integer)) or window < 1:
        raise ValueError(f"{name} must be a positive integer, got {window}")


def sma(close, window: int, name: str = "") -> IndicatorSeries:
    close = _as_prices(close)
    _check_window(window)
    if window > len(close):
        raise ValueError(f"window {window} exceeds series length {len(close)}")
    values = pd.Series(close).rolling(window=window, min_periods=window).mean().to_numpy()
    return IndicatorSeries(name or f"sma_{window}", values, window - 1)


def _ema_after(values: np.ndarray, first: int, window: int) -> Tuple[np.ndarray, int]:
    """EMA seeded by the simple mean of the first `window` defined points starting at `first`."""
    out = np.full(len(values), np.nan)
    seed_at = first + window - 1
    if seed_at >= len(values):
        return out, len(values)
    alpha = 2.0 / (window + 1)
    out[seed_at] = values[first:seed_at + 1].mean()
    for t in range(seed_at + 1, len(values)):
        out[t] = alpha * values[t] + (1.0 - alpha) * out[t - 1]
    return out, seed_at


def ema(close, window: int, name: str = "") -> IndicatorSeries:
    close = _as_prices(close)
    _check_window(window)
    values, warm_up = _ema_after(close, 0, window)
    return IndicatorSeries(name or f"ema_{window}", values, warm_up)


def _wilder(values: np.ndarray, first: int, window: int) -> np.ndarray:
    """Wilder smoothing of values[first:], seeded by the mean of the first `window` of them."""
    out = np.full(len(values), np.nan)
    seed_at = first + window - 1
    out[seed_at] = values[first:seed_at + 1].mean()
    for t in range(seed_at + 1, len(values)):
        out[t] = (out[t - 1] * (window - 1) + values[t]) / window
    return out


def rsi(close, window: int = RSI_WINDOW, name: str = "") -> IndicatorSeries:
    close = _as_prices(close)
    _check_window(window)
    if len(close) <= window:
        raise ValueError(f"rsi needs more than {window} points, got {len(close)}")
    delta = np.concatenate(([0.0], np.diff(close)))
    avg_gain = _wilder(np.clip(delta, 0.0, None), 1, window)
    avg_loss = _wilder(np.clip(-delta, 0.0, None), 1, window)

    values = np.full(len(close), np.nan)
    for t in range(window, len(close)):
        gain, loss = avg_gain[t], avg_loss[t]
        if loss == 0.0:
            values[t] = 50.0 if gain == 0.0 else 100.0
        else:
            values[t] = 100.0 - 100.0 / (1.0 + gain / loss)
    return IndicatorSeries(name or f"rsi_{window}", values, window)


def macd(close, fast: int = MACD_FAST, slow: int = MACD_SLOW,
         signal: int = MACD_SIGNAL) -> Tuple[IndicatorSeries, IndicatorSeries, IndicatorSeries]:
    close = _as_prices(close)
    for label, window in (("fast", fast), ("slow", slow), ("signal", signal)):
        _check_window(window, label)
    if fast >= slow:
        raise ValueError(f"fast window ({fast}) must be shorter than slow window ({slow})")

    line_values = ema(close, fast).values - ema(close, slow).values
    line_warm_up = min(slow - 1, len(close))
    line = IndicatorSeries("macd_line", line_values, line_warm_up)
    signal_values, signal_warm_up = _ema_after(line_values, line_warm_up, signal)
    signal_line = IndicatorSeries("macd_signal", signal_values, signal_warm_up)
    histogram = IndicatorSeries("macd_hist", line_values - signal_values, signal_warm_up)
    return line, signal_line, histogram


def stochastic(high, low, close, k_window: int = STOCH_K_WINDOW,
               d_window: int = STOCH_D_WINDOW) -> Tuple[IndicatorSeries, IndicatorSeries]:
    high, low, close = _as_prices(high), _as_prices(low), _as_prices(close)
    _check_window(k_window, "k_window")
    _check_window(d_window, "d_window")
    highest = pd.Series(high).rolling(window=k_window, min_periods=k_window).max().to_numpy()
    lowest = pd.Series(low).rolling(window=k_window, min_periods=k_window).min().to_numpy()

    k_values = np.full(len(close), np.nan)
    for t in range(k_window - 1, len(close)):
        span = highest[t] - lowest[t]
        k_values[t] = 50.0 if span == 0.0 else 100.0 * (close[t] - lowest[t]) / span
    k_warm_up = min(k_window - 1, len(close))
    percent_k = IndicatorSeries("stoch_k", k_values, k_warm_up)

    d_values = pd.Series(k_values).rolling(window=d_window, min_periods=d_window).mean().to_numpy()
    percent_d = IndicatorSeries("stoch_d", d_values, min(k_warm_up + d_window - 1, len(close)))
    return percent_k, percent_d


def true_range(high, low, close) -> np.ndarray:
    """TR[t] for t >= 1; TR[0] is undefined (no previous close)."""
    high, low, close = _as_prices(high), _as_prices(low), _as_prices(close)
    out = np.full(len(close), np.nan)
    previous = close[:-1]
    out[1:] = np.maximum.reduce([
        high[1:] - low[1:],
        np.abs(high[1:] - previous),
        np.abs(low[1:] - previous),
    ])
    return out


def atr(high, low, close, window: int = ATR_WINDOW, name: str = "") -> IndicatorSeries:
    _check_window(window)
    if len(close) <= window:
        raise ValueError(f"atr needs more than {window} points, got {len(close)}")
    values = _wilder(true_range(high, low, close), 1, window)
    return IndicatorSeries(name or f"atr_{window}", values, window)


def aroon(high, low, window: int = AROON_WINDOW) -> Tuple[IndicatorSeries, IndicatorSeries]:
    high, low = _as_prices(high), _as_prices(low)
    _check_window(window)
    if len(high) <= window:
        raise ValueError(f"aroon needs more than {window} points, got {len(high)}")

    # reversed windows: argmax/argmin hit the most recent extremum first
    high_windows = sliding_window_view(high, window + 1)[:, ::-1]
    low_windows = sliding_window_view(low, window + 1)[:, ::-1]
    since_high = np.argmax(high_windows, axis=1)
    since_low = np.argmin(low_windows, axis=1)

    up = np.full(len(high), np.nan)
    down = np.full(len(high), np.nan)
    up[window:] = 100.0 * (window - since_high) / window
    down[window:] = 100.0 * (window - since_low) / window
    return IndicatorSeries("aroon_up", up, window), IndicatorSeries("aroon_down", down, window)


def compute_indicators(series: OhlcSeries) -> Dict[str, IndicatorSeries]:
    high, low, close = series.highs, series.lows, series.closes
    columns: Dict[str, IndicatorSeries] = {}
    for window in SMA_WINDOWS:
        columns[f"sma_{window}"] = sma(close, window)
    for window in EMA_WINDOWS:
        columns[f"ema_{window}"] = ema(close, window)
    columns[f"rsi_{RSI_WINDOW}"] = rsi(close, RSI_WINDOW)
    for part in macd(close, MACD_FAST, MACD_SLOW, MACD_SIGNAL):
        columns[part.name] = part
    for part in stochastic(high, low, close, STOCH_K_WINDOW, STOCH_D_WINDOW):
        columns[part.name] = part
    columns[f"atr_{ATR_WINDOW}"] = atr(high, low, close, ATR_WINDOW)
    for part in aroon(high, low, AROON_WINDOW):
        columns[part.name] = part
    return columns


@dataclass(frozen=True)
class Dataset:
    feature_names: Tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    dates: Tuple[date, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=np.int8)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2:
            raise DatasetError(f"feature matrix must be 2-D, got shape {X.shape}")
        if X.shape[1] != len(self.feature_names):
            raise DatasetError(f"{len(self.feature_names)} feature names for {X.shape[1]} columns")
        if not (X.shape[0] == len(y) == len(self.dates)):
            raise DatasetError(f"row mismatch: X {X.shape[0]}, y {len(y)}, dates {len(self.dates)}")
        if not np.all(np.isfinite(X)):
            raise DatasetError("feature matrix contains undefined entries")
        if not np.all((y == 0) | (y == 1)):
            raise DatasetError("labels must be 0 or 1")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, start: int, stop: int) -> "Dataset":
        return Dataset(self.feature_names, self.X[start:stop], self.y[start:stop], self.dates[start:stop])

    def with_features(self, feature_names: Sequence[str], X: np.ndarray) -> "Dataset":
        return Dataset(tuple(feature_names), X, self.y, self.dates)


def build_feature_matrix(series: OhlcSeries, features: Sequence[str] = CANONICAL_FEATURES) -> Dataset:
    """
    Computes the indicator columns, drops warm-up rows and the final unlabeled day,
    and aligns row T with label Change(close[T], close[T+1]).
    """
    unknown = [name for name in features if name not in CANONICAL_FEATURES]
    if unknown:
        raise DatasetError(f"unknown feature names: {', '.join(unknown)}")
    try:
        columns = compute_indicators(series)
    except ValueError as exc:
        raise DatasetError(f"series too short for feature extraction: {exc}") from exc

    start = max(columns[name].warm_up for name in features)
    stop = len(series) - 1
    if stop - start < MIN_DATASET_ROWS:
        raise DatasetError(
            f"series too short: {len(series)} rows leave {max(stop - start, 0)} after warm-up, "
            f"need {MIN_DATASET_ROWS}")

    X = np.column_stack([columns[name].values[start:stop] for name in features])
    y = make_labels(series)[start:stop]
    dataset = Dataset(tuple(features), X, y, tuple(series.dates[start:stop]))
    logger.info("Built %d x %d feature matrix for %s", len(dataset), dataset.n_features,
                series.symbol or "<unnamed>")
    return dataset


def select_columns(dataset: Dataset, indices: Sequence[int]) -> Dataset:
    indices = list(indices)
    names = [dataset.feature_names[i] for i in indices]
    return dataset.with_features(names, dataset.X[:, indices])


def dataset_to_csv(dataset: Dataset) -> str:
    frame = pd.DataFrame(dataset.X, columns=list(dataset.feature_names))
    frame["label"] = dataset.y.astype(int)
    return frame.to_csv(index=False, lineterminator="\n")


@dataclass(frozen=True)
class Scaler:
    kind: ScalerKind
    feature_names: Tuple[str, ...]
    first: np.ndarray   # mean (standardize) or min (minmax_to_angle)
    second: np.ndarray  # stddev (standardize) or max (minmax_to_angle)
    flat: np.ndarray    # columns constant on the fit data


def fit_scaler(train: Dataset, kind: ScalerKind) -> Scaler:
    if len(train) == 0:
        raise DatasetError("cannot fit a scaler on an empty dataset")
    if kind is ScalerKind.standardize:
        first, second = train.X.mean(axis=0), train.X.std(axis=0)
    else:
        first, second = train.X.min(axis=0), train.X.max(axis=0)
    return Scaler(kind, train.feature_names, first, second, np.ptp(train.X, axis=0) == 0.0)


def apply_scaler(scaler: Scaler, dataset: Dataset) -> Dataset:
    if dataset.feature_names != scaler.feature_names:
        raise DatasetError(
            f"feature-name mismatch: scaler fitted on {list(scaler.feature_names)}, "
            f"got {list(dataset.feature_names)}")
    if len(dataset) == 0:
        raise DatasetError("cannot scale an empty dataset")

    X = dataset.X
    if scaler.kind is ScalerKind.standardize:
        spread = np.where(scaler.flat, 1.0, scaler.second)
        scaled = np.where(scaler.flat, 0.0, (X - scaler.first) / spread)
    else:
        spread = np.where(scaler.flat, 1.0, scaler.second - scaler.first)
        scaled = np.where(scaler.flat, ANGLE_MAX / 2.0,
                          np.clip((X - scaler.first) / spread, 0.0, 1.0) * ANGLE_MAX)
    return dataset.with_features(dataset.feature_names, scaled)

