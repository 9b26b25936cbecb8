"""Regression metrics and report rows (the machine-readable comparison table)."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dataframe import ScalerParams, invert_scaler
from .errors import EmptyInput, LengthMismatch, ZeroVariance

REPORT_HEADER = ("model", "r2", "mae", "mse", "rmse", "n")
ERROR_MARKER = "ERROR"


def _pair(pred, actual):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if pred.shape != actual.shape:
        raise LengthMismatch(f"pred has {pred.size} values, actual has {actual.size}")
    if pred.size == 0:
        raise EmptyInput("metrics need at least one value")
    return pred, actual


def mae(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    return float(np.mean(np.abs(pred - actual)))


def _scaled_square_mean(pred, actual):
    """``(m, e)`` with ``mean(diff**2) = m * 4**e``.

    Dividing by a power of two near max|diff| first is exact and keeps the
    squares clear of underflow and overflow.
    """
    pred, actual = _pair(pred, actual)
    diff = pred - actual
    peak = float(np.max(np.abs(diff)))
    if peak == 0.0 or not math.isfinite(peak):
        return float(np.mean(diff * diff)), 0
    _, e = math.frexp(peak)
    u = np.ldexp(diff, -e)
    return float(np.mean(u * u)), e


def mse(pred, actual) -> float:
    m, e = _scaled_square_mean(pred, actual)
    return math.ldexp(m, 2 * e)


def rmse(pred, actual) -> float:
    m, e = _scaled_square_mean(pred, actual)
    return math.ldexp(math.sqrt(m), e)


def r2(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    if pred.size < 2:
        raise EmptyInput("r2 needs at least two values")
    resid = actual - pred
    centered = actual - actual.mean()
    ss_tot = float(np.dot(centered, centered))
    if ss_tot == 0.0:
        raise ZeroVariance("actual values are constant; r2 undefined")
    return 1.0 - float(np.dot(resid, resid)) / ss_tot


@dataclass(frozen=True)
class MetricsReport:
    model_name: str
    r2: float
    mae: float
    mse: float
    rmse: float
    n: int
    error: str | None = None

    @classmethod
    def failed(cls, model_name: str, message: str) -> "MetricsReport":
        nan = float("nan")
        return cls(model_name, nan, nan, nan, nan, 0, error=message)

    def to_dict(self) -> dict:
        doc = asdict(self)
        if self.error is None:
            doc.pop("error")
        else:
            for key in ("r2", "mae", "mse", "rmse"):
                doc[key] = None
        return doc

    def csv_row(self) -> list[str]:
        if self.error is not None:
            return [self.model_name, ERROR_MARKER, ERROR_MARKER, ERROR_MARKER, ERROR_MARKER, "0"]
        return [self.model_name, repr(self.r2), repr(self.mae), repr(self.mse),
                repr(self.rmse), str(self.n)]


def compute_report(pred, actual, model_name: str) -> MetricsReport:
    pred, actual = _pair(pred, actual)
    return MetricsReport(model_name, r2(pred, actual), mae(pred, actual), mse(pred, actual),
                         rmse(pred, actual), int(pred.size))


def build_report(pred, actual, model_name: str, scaler: ScalerParams | None,
                 target_column: str) -> MetricsReport:
    """Metrics in price units: both vectors are inverse-scaled first."""
    if scaler is not None:
        pred = invert_scaler(pred, scaler, target_column)
        actual = invert_scaler(actual, scaler, target_column)
    return compute_report(pred, actual, model_name)


def sort_reports(reports):
    """Descending r2; failed rows last, in input order."""
    ok = [r for r in reports if r.error is None]
    bad = [r for r in reports if r.error is not None]
    return sorted(ok, key=lambda r: -r.r2) + bad


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for rep in reports:
        writer.writerow(rep.csv_row())
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
