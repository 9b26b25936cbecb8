"""Seeded synthetic OHLCV series: linear trend plus a sine cycle plus noise."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigInvalid

START_DATE = "2016-01-04"
# rows beyond the lookback that any usable series must have
MIN_EXTRA_POINTS = 10


@dataclass(frozen=True)
class SyntheticSpec:
    n_points: int = 500
    trend: float = 0.02
    amplitude: float = 10.0
    period: float = 40.0
    noise_std: float = 1.0
    level: float = 100.0
    seed: int = 42

    def validate(self, lookback: int = 0) -> "SyntheticSpec":
        problems = []
        if self.n_points <= lookback + MIN_EXTRA_POINTS:
            problems.append(f"n_points must exceed lookback + {MIN_EXTRA_POINTS}")
        if not self.period > 0:
            problems.append("period must be positive")
        if self.noise_std < 0:
            problems.append("noise_std must be >= 0")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticSpec":
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigInvalid(f"unknown synthetic option(s): {', '.join(sorted(unknown))}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None


def cycle(t: np.ndarray, period: float) -> np.ndarray:
    """sin(2 pi t / period), exact at quarter-period points."""
    phase = np.mod(np.asarray(t, dtype=np.float64), period) / period
    out = np.sin(2.0 * np.pi * phase)
    quarter = phase * 4.0
    exact = quarter == np.round(quarter)
    out[exact] = np.array([0.0, 1.0, 0.0, -1.0])[quarter[exact].astype(np.int64) % 4]
    return out


def generate(spec: SyntheticSpec) -> dict[str, np.ndarray]:
    """Columns ``date, open, high, low, close, volume`` as arrays."""
    spec.validate()
    n = spec.n_points
    rng = np.random.default_rng(spec.seed)
    t = np.arange(n, dtype=np.float64)
    noise = rng.normal(0.0, spec.noise_std, n) if spec.noise_std > 0 else np.zeros(n)
    close = spec.level + spec.trend * t + spec.amplitude * cycle(t, spec.period) + noise
    open_ = np.concatenate([close[:1], close[:-1]])
    spread = 0.25 * max(spec.noise_std, 1e-3)
    high = np.maximum(open_, close) + np.abs(rng.normal(0.0, spread, n))
    low = np.minimum(open_, close) - np.abs(rng.normal(0.0, spread, n))
    volume = np.round(rng.lognormal(np.log(1e6), 0.3, n))
    dates = np.busday_offset(START_DATE, np.arange(n), roll="forward")
    return {"date": dates, "open": open_, "high": high, "low": low, "close": close,
            "volume": volume}


def to_csv_text(columns: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(names)
    n = len(columns[names[0]])
    for k in range(n):
        row = []
        for name in names:
            v = columns[name][k]
            row.append(str(v) if name == "date" else repr(float(v)))
        writer.writerow(row)
    return buf.getvalue()


def gen_synthetic(spec: SyntheticSpec) -> str:
    """CSV text for ``spec``; identical specs give identical text."""
    return to_csv_text(generate(spec))
