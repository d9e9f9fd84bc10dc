"""Loading, min-max scaling, context segmentation and sliding-window samples."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    timestamps: tuple[str, ...]
    values: np.ndarray
    frequency: str = "weekly"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if len(self.timestamps) != values.size:
            raise DataError(f"{len(self.timestamps)} timestamps but {values.size} values")
        if not np.all(np.isfinite(values)):
            raise DataError("series contains non-finite values")
        if self.frequency not in ("daily", "weekly", "monthly"):
            raise DataError(f"unknown frequency {self.frequency!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", tuple(self.timestamps))

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class NormalizationParams:
    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise DataError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")


@dataclass
class WindowedDataset:
    """Inputs shaped (n, seq_len, window) with one scalar target per sample.

    ``target_index`` holds each target's position in the source series, so
    ordering and leakage checks can be made against absolute indices.
    """

    inputs: np.ndarray
    targets: np.ndarray
    window: int
    target_index: np.ndarray

    def __len__(self):
        return self.targets.size

    def __iter__(self):
        return iter(zip(self.inputs, self.targets))

    def as_batch(self):
        return self.inputs, self.targets

    def subset(self, idx) -> "WindowedDataset":
        return WindowedDataset(self.inputs[idx], self.targets[idx], self.window, self.target_index[idx])


@dataclass
class Context:
    id: int
    train: WindowedDataset
    test: WindowedDataset
    raw_span: range
    stats: tuple[float, float]
    start_label: str = ""
    end_label: str = ""


def load_csv(path, frequency: str = "weekly") -> TimeSeries:
    """Read a ``date,value`` CSV in file order.

    Row numbers in error messages count data rows from 1 (header excluded).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    timestamps, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "value"]:
            raise DataError(f"{path}: expected header 'date,value', got {header!r}")
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}: malformed row {row_no}: expected 2 fields, got {len(row)}")
            try:
                value = float(row[1])
            except ValueError:
                raise DataError(f"{path}: non-numeric value {row[1]!r} at row {row_no}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}: non-finite value {row[1]!r} at row {row_no}")
            timestamps.append(row[0].strip())
            values.append(value)
    if len(values) < 2:
        raise DataError(f"{path}: need at least 2 data rows, found {len(values)}")
    return TimeSeries(tuple(timestamps), np.array(values), frequency)


def fit_normalizer(series) -> NormalizationParams:
    values = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        raise DataError("cannot min-max normalize a constant series")
    return NormalizationParams(lo, hi)


def normalize(x, p: NormalizationParams):
    if isinstance(x, (list, tuple)):
        x = np.asarray(x, dtype=np.float64)
    return (x - p.x_min) / (p.x_max - p.x_min)


def denormalize(x, p: NormalizationParams):
    if isinstance(x, (list, tuple)):
        x = np.asarray(x, dtype=np.float64)
    return x * (p.x_max - p.x_min) + p.x_min


def make_windows(values, window: int, seq_len: int = 1, offset: int = 0) -> WindowedDataset:
    """Sliding lag-vector samples.

    Sample t has ``seq_len`` steps; step s sees ``values[t+s : t+s+window]`` and
    the target is ``values[t+seq_len-1+window]``. ``offset`` shifts the
    recorded target indices into series coordinates.
    """
    values = np.asarray(values, dtype=np.float64)
    if window < 1 or seq_len < 1:
        raise DataError("window and seq_len must be >= 1")
    count = values.size - window - seq_len + 1
    if count < 1:
        raise DataError(
            f"{values.size} values are too few for window={window}, seq_len={seq_len}"
        )
    lags = sliding_window_view(values, window)  # (len - window + 1, window)
    inputs = np.stack([lags[s : s + count] for s in range(seq_len)], axis=1)
    first_target = window + seq_len - 1
    targets = values[first_target : first_target + count].copy()
    index = np.arange(first_target, first_target + count) + offset
    return WindowedDataset(np.ascontiguousarray(inputs), targets, window, index)


def as_fraction(x) -> Fraction:
    # str() so that 0.8 means 4/5 rather than its binary approximation
    return x if isinstance(x, Fraction) else Fraction(str(x))


def split_count(count: int, train_frac) -> int:
    return math.floor(as_fraction(train_frac) * count)


def segment_contexts(
    series: TimeSeries,
    n_contexts: int,
    train_frac=Fraction(4, 5),
    window: int = 12,
    seq_len: int = 1,
    normalizer: NormalizationParams | None = None,
) -> list[Context]:
    """Cut the series into ``n_contexts`` equal consecutive spans (remainder dropped).

    Windows are built inside each span only, then the first
    floor(train_frac * count) samples become the training set.
    ``normalizer`` defaults to a fit on the full series.
    """
    if n_contexts < 1:
        raise DataError("n_contexts must be >= 1")
    frac = as_fraction(train_frac)
    if not 0 < frac < 1:
        raise DataError(f"train_frac must lie in (0, 1), got {train_frac}")
    span = len(series) // n_contexts
    count = span - window - seq_len + 1
    n_train = split_count(count, frac) if count > 0 else 0
    if count < 2 or n_train < 1 or n_train >= count:
        raise DataError(
            f"{len(series)} points are too few for {n_contexts} contexts with window={window}, "
            f"seq_len={seq_len} (span {span} yields {max(count, 0)} samples)"
        )
    if normalizer is None:
        normalizer = fit_normalizer(series)
    scaled = normalize(series.values, normalizer)

    contexts = []
    for cid in range(n_contexts):
        lo, hi = cid * span, (cid + 1) * span
        ds = make_windows(scaled[lo:hi], window, seq_len, offset=lo)
        raw = series.values[lo:hi]
        contexts.append(
            Context(
                id=cid,
                train=ds.subset(slice(0, n_train)),
                test=ds.subset(slice(n_train, None)),
                raw_span=range(lo, hi),
                stats=(float(raw.mean()), float(raw.std(ddof=1))),
                start_label=series.timestamps[lo],
                end_label=series.timestamps[hi - 1],
            )
        )
    return contexts


def first_context_normalizer(series: TimeSeries, n_contexts: int, train_frac, window: int, seq_len: int) -> NormalizationParams:
    """Min-max fit on the raw points the first context's training windows touch."""
    span = len(series) // n_contexts
    count = span - window - seq_len + 1
    n_train = split_count(count, train_frac)
    if count < 2 or n_train < 1:
        raise DataError("series too short for the requested segmentation")
    last = n_train - 1 + window + seq_len - 1
    return fit_normalizer(series.values[: last + 1])
