"""Frame to model-ready windows: clean, scale on training rows, window, split."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .dataframe import (
    DEFAULT_LOOKBACK,
    DEFAULT_TARGET,
    ScalerParams,
    TimeSeriesFrame,
    WindowedDataset,
    apply_scaler,
    chronological_split,
    fit_scaler,
    handle_missing,
    make_windows,
    train_row_count,
)
from .errors import ConfigInvalid, FrameTooShort, SchemaMismatch


@dataclass(frozen=True)
class PipelineSpec:
    lookback: int = DEFAULT_LOOKBACK
    train_fraction: float = 0.8
    features: tuple[str, ...] | None = None
    target: str = DEFAULT_TARGET
    missing_policy: str = "forward_fill"

    def validate(self) -> "PipelineSpec":
        problems = []
        if self.lookback < 1:
            problems.append("lookback must be a positive integer")
        if not 0.0 < self.train_fraction < 1.0:
            problems.append("train_fraction must lie in (0, 1)")
        if self.missing_policy not in ("forward_fill", "drop_row"):
            problems.append("missing_policy must be forward_fill or drop_row")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["features"] = list(self.features) if self.features is not None else None
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineSpec":
        doc = dict(doc)
        if doc.get("features") is not None:
            doc["features"] = tuple(doc["features"])
        return cls(**doc).validate()


@dataclass(frozen=True)
class Prepared:
    spec: PipelineSpec
    frame: TimeSeriesFrame  # cleaned, unscaled
    scaler: ScalerParams
    dataset: WindowedDataset  # all windows, scaled
    train: WindowedDataset
    test: WindowedDataset


def feature_names(frame: TimeSeriesFrame, spec: PipelineSpec) -> tuple[str, ...]:
    return tuple(spec.features) if spec.features is not None else tuple(frame.columns)


def prepare(frame: TimeSeriesFrame, spec: PipelineSpec) -> Prepared:
    """Clean, fit the scaler on the rows the training windows touch, window, split."""
    spec.validate()
    if frame.target_name != spec.target:
        frame = TimeSeriesFrame(frame.timestamps, frame.columns, spec.target)
    clean = handle_missing(frame, spec.missing_policy)
    if len(clean) <= spec.lookback + 1:
        raise FrameTooShort(f"{len(clean)} rows after cleaning; need more than lookback+1")
    n_fit = train_row_count(len(clean), spec.lookback, spec.train_fraction)
    scaler = fit_scaler(clean, slice(0, n_fit))
    dataset = make_windows(apply_scaler(clean, scaler), spec.lookback, feature_names(clean, spec))
    train, test = chronological_split(dataset, spec.train_fraction)
    return Prepared(spec, clean, scaler, dataset, train, test)


def windows_for(frame: TimeSeriesFrame, spec: PipelineSpec, scaler: ScalerParams,
                names: tuple[str, ...]) -> WindowedDataset:
    """Every forecastable window of ``frame`` under an already-fitted scaler."""
    missing = [n for n in names if n not in frame.columns]
    if missing or spec.target not in frame.columns:
        raise SchemaMismatch(f"data lacks column(s) used in training: {', '.join(missing or [spec.target])}")
    if frame.target_name != spec.target:
        frame = TimeSeriesFrame(frame.timestamps, frame.columns, spec.target)
    clean = handle_missing(frame, spec.missing_policy)
    if len(clean) <= spec.lookback:
        raise FrameTooShort(
            f"{len(clean)} usable rows; forecasting needs at least lookback+1 = {spec.lookback + 1}")
    cols = {n: clean.columns[n] for n in set(names) | {spec.target}}
    used = TimeSeriesFrame(clean.timestamps, cols, spec.target)
    unknown = [n for n in cols if n not in scaler.mins]
    if unknown:
        raise SchemaMismatch(f"scaler has no range for: {', '.join(unknown)}")
    return make_windows(apply_scaler(used, scaler), spec.lookback, names)


def tabularize(inputs) -> np.ndarray:
    """[n, lookback, features] windows as [n, lookback * features] rows (time-major)."""
    X = np.asarray(inputs, dtype=np.float64)
    return np.ascontiguousarray(X.reshape(X.shape[0], -1))
