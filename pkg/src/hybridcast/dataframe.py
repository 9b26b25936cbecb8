"""Time-series ingestion: CSV loading, missing values, min-max scaling,
sliding windows and chronological splitting.

Missing cells are stored as NaN. Every transformation returns a new frame.
"""
from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AllMissingColumn,
    DegenerateSplit,
    DuplicateTimestamp,
    EmptyFile,
    EmptyRange,
    FrameTooShort,
    MissingColumn,
    UnknownColumn,
)

DATE_COLUMN = "date"
DEFAULT_SCHEMA = ("date", "open", "high", "low", "close", "volume")
DEFAULT_TARGET = "close"
DEFAULT_LOOKBACK = 20
MISSING_MARKERS = frozenset({"", "n/a", "nan"})


@dataclass(frozen=True)
class TimeSeriesFrame:
    timestamps: np.ndarray  # datetime64[D], strictly increasing
    columns: dict[str, np.ndarray]
    target_name: str = DEFAULT_TARGET

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[D]")
        object.__setattr__(self, "timestamps", ts)
        cols = {k: np.asarray(v, dtype=np.float64) for k, v in self.columns.items()}
        object.__setattr__(self, "columns", cols)
        for name, col in cols.items():
            if col.shape != ts.shape:
                raise ValueError(f"column {name!r} has {col.shape[0]} rows, expected {ts.shape[0]}")
        if ts.size > 1 and not np.all(ts[1:] > ts[:-1]):
            raise DuplicateTimestamp("timestamps must be strictly increasing")
        if self.target_name not in cols:
            raise MissingColumn(f"target column {self.target_name!r} not present")

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def column_names(self) -> list[str]:
        return list(self.columns)

    def take(self, rows) -> "TimeSeriesFrame":
        return TimeSeriesFrame(
            self.timestamps[rows],
            {k: v[rows] for k, v in self.columns.items()},
            self.target_name,
        )

    def missing_mask(self) -> np.ndarray:
        """Boolean [n_rows, n_columns] mask of missing cells."""
        if not self.columns:
            return np.zeros((len(self), 0), dtype=bool)
        return np.column_stack([np.isnan(v) for v in self.columns.values()])


def _parse_number(cell: str) -> float:
    text = cell.strip()
    if text.lower() in MISSING_MARKERS:
        return np.nan
    try:
        return float(text)
    except ValueError:
        return np.nan


def load_csv(
    path: str | Path,
    schema: Sequence[str] = DEFAULT_SCHEMA,
    target: str = DEFAULT_TARGET,
) -> TimeSeriesFrame:
    """Read a daily OHLCV csv into a frame sorted by date.

    Columns beyond ``schema`` are kept as additional numeric features.
    Unparseable numeric cells become NaN rather than being dropped.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    missing = [c for c in schema if c not in header]
    if DATE_COLUMN not in header and DATE_COLUMN not in missing:
        missing.insert(0, DATE_COLUMN)
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
    if not rows:
        raise EmptyFile(f"{path}: header present but no data rows")

    date_idx = header.index(DATE_COLUMN)
    numeric = [(i, h) for i, h in enumerate(header) if h != DATE_COLUMN]
    if target not in dict((h, i) for i, h in numeric):
        raise MissingColumn(f"{path}: target column {target!r} not present")

    dates = []
    values = np.full((len(rows), len(numeric)), np.nan)
    for r, row in enumerate(rows):
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        try:
            dates.append(_dt.date.fromisoformat(row[date_idx].strip()))
        except ValueError:
            raise ValueError(f"{path}: row {r + 2}: unparseable date {row[date_idx]!r}") from None
        for j, (i, _) in enumerate(numeric):
            values[r, j] = _parse_number(row[i])

    stamps = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(stamps, kind="stable")
    stamps = stamps[order]
    if stamps.size > 1 and np.any(stamps[1:] == stamps[:-1]):
        dup = stamps[1:][stamps[1:] == stamps[:-1]][0]
        raise DuplicateTimestamp(f"{path}: duplicate date {dup}")
    values = values[order]
    cols = {h: values[:, j].copy() for j, (_, h) in enumerate(numeric)}
    return TimeSeriesFrame(stamps, cols, target)


def handle_missing(frame: TimeSeriesFrame, policy: str = "forward_fill") -> TimeSeriesFrame:
    """Remove missing markers by forward filling or by dropping rows.

    Forward fill copies the latest prior observation per column; rows that
    still hold a marker (nothing observed yet) are dropped.
    """
    for name, col in frame.columns.items():
        if col.size and np.all(np.isnan(col)):
            raise AllMissingColumn(f"column {name!r} has no observed values")

    if policy == "forward_fill":
        filled = {}
        for name, col in frame.columns.items():
            idx = np.where(np.isnan(col), 0, np.arange(col.size))
            np.maximum.accumulate(idx, out=idx)
            out = col[idx]
            # leading gaps index row 0, which is itself NaN, so they stay NaN
            filled[name] = out
        frame = TimeSeriesFrame(frame.timestamps, filled, frame.target_name)
    elif policy != "drop_row":
        raise ValueError(f"unknown missing-value policy {policy!r}")

    keep = ~frame.missing_mask().any(axis=1)
    if keep.all():
        return frame
    return frame.take(keep)


@dataclass(frozen=True)
class ScalerParams:
    mins: dict[str, float]
    maxs: dict[str, float]

    @property
    def degenerate(self) -> set[str]:
        return {k for k in self.mins if self.maxs[k] == self.mins[k]}

    def to_dict(self) -> dict:
        return {"mins": dict(self.mins), "maxs": dict(self.maxs)}

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalerParams":
        return cls({k: float(v) for k, v in doc["mins"].items()},
                   {k: float(v) for k, v in doc["maxs"].items()})


def _as_rows(train_rows, n: int) -> np.ndarray:
    if isinstance(train_rows, slice):
        return np.arange(n)[train_rows]
    if isinstance(train_rows, tuple) and len(train_rows) == 2:
        return np.arange(n)[slice(*train_rows)]
    return np.arange(n)[np.asarray(train_rows)]


def fit_scaler(frame: TimeSeriesFrame, train_rows=slice(None)) -> ScalerParams:
    """Per-column min/max learned from ``train_rows`` only."""
    rows = _as_rows(train_rows, len(frame))
    if rows.size == 0:
        raise EmptyRange("train_rows selects no rows")
    mins, maxs = {}, {}
    for name, col in frame.columns.items():
        part = col[rows]
        mins[name] = float(np.min(part))
        maxs[name] = float(np.max(part))
    return ScalerParams(mins, maxs)


def scale_values(values, params: ScalerParams, column: str) -> np.ndarray:
    if column not in params.mins:
        raise UnknownColumn(column)
    lo, hi = params.mins[column], params.maxs[column]
    values = np.asarray(values, dtype=np.float64)
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def apply_scaler(frame: TimeSeriesFrame, params: ScalerParams) -> TimeSeriesFrame:
    """Map every column onto [0, 1] by its training range (no clipping)."""
    scaled = {name: scale_values(col, params, name) for name, col in frame.columns.items()}
    return TimeSeriesFrame(frame.timestamps, scaled, frame.target_name)


def invert_scaler(values, params: ScalerParams, column: str) -> np.ndarray:
    if column not in params.mins:
        raise UnknownColumn(column)
    lo, hi = params.mins[column], params.maxs[column]
    values = np.asarray(values, dtype=np.float64)
    if hi == lo:
        return np.full_like(values, lo)
    return values * (hi - lo) + lo


@dataclass(frozen=True)
class WindowedDataset:
    inputs: np.ndarray  # [n_samples, lookback, n_features]
    targets: np.ndarray  # [n_samples]
    sample_timestamps: np.ndarray
    feature_names: tuple[str, ...] = field(default=())
    target_name: str = DEFAULT_TARGET

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    @property
    def lookback(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def n_features(self) -> int:
        return int(self.inputs.shape[2])

    def subset(self, rows) -> "WindowedDataset":
        return WindowedDataset(
            self.inputs[rows], self.targets[rows], self.sample_timestamps[rows],
            self.feature_names, self.target_name,
        )

    def with_targets(self, targets) -> "WindowedDataset":
        return WindowedDataset(
            self.inputs, np.asarray(targets, dtype=np.float64), self.sample_timestamps,
            self.feature_names, self.target_name,
        )


def make_windows(
    frame: TimeSeriesFrame,
    lookback: int = DEFAULT_LOOKBACK,
    features: Iterable[str] | None = None,
) -> WindowedDataset:
    """Sample i uses rows [i, i+lookback) to predict the target at row i+lookback."""
    if lookback < 1:
        raise ValueError("lookback must be a positive integer")
    n = len(frame)
    if n <= lookback:
        raise FrameTooShort(f"frame has {n} rows; need more than lookback={lookback}")
    names = tuple(features) if features is not None else tuple(frame.columns)
    for name in names:
        if name not in frame.columns:
            raise UnknownColumn(name)
    data = np.column_stack([frame.columns[name] for name in names])
    windows = np.lib.stride_tricks.sliding_window_view(data, lookback, axis=0)
    # sliding_window_view puts the window axis last: [n-lookback+1, F, lookback]
    inputs = np.ascontiguousarray(windows[:-1].transpose(0, 2, 1))
    targets = frame.columns[frame.target_name][lookback:].copy()
    return WindowedDataset(inputs, targets, frame.timestamps[lookback:].copy(),
                           names, frame.target_name)


def chronological_split(ds: WindowedDataset, train_fraction: float):
    """First floor(n * fraction) samples train, the remainder test."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = len(ds)
    n_train = int(np.floor(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise DegenerateSplit(f"{n} samples at fraction {train_fraction} leaves an empty side")
    return ds.subset(slice(0, n_train)), ds.subset(slice(n_train, n))


def train_row_count(n_rows: int, lookback: int, train_fraction: float) -> int:
    """Number of leading frame rows touched by the training windows and targets."""
    n_samples = n_rows - lookback
    return lookback + int(np.floor(n_samples * train_fraction))
