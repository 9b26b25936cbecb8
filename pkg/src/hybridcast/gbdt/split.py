"""Split gain and best-split search over per-feature histograms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .histogram import Histogram


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    bin: int  # bins <= bin go left
    gain: float
    left_grad: float
    left_hess: float
    left_count: int


def split_gains(hist: Histogram, n_bins_per_feature, g_parent, h_parent, n_parent,
                lam, gamma, min_samples_leaf, out=None) -> np.ndarray:
    """[n_features, max_bins - 1] matrix of
    ``0.5 * (GL^2/(HL+lam) + GR^2/(HR+lam) - GP^2/(HP+lam)) - gamma``,
    ``-inf`` where a side is below ``min_samples_leaf`` or the bin is not a cut."""
    return kernels.split_gains(
        hist.grad, hist.hess, hist.count, np.asarray(n_bins_per_feature, dtype=np.int32),
        float(g_parent), float(h_parent), int(n_parent), float(lam), float(gamma),
        int(min_samples_leaf), out)


def pick_best(gains: np.ndarray) -> tuple[int, int] | None:
    """Highest positive gain; ties go to the lowest feature, then lowest bin."""
    if gains.size == 0:
        return None
    flat = int(np.argmax(gains))
    if not gains.flat[flat] > 0.0:
        return None
    return divmod(flat, gains.shape[1])


def left_sums(hist: Histogram, feature: int, bin_: int) -> tuple[float, float, int]:
    # same sequential accumulation as the gain scan
    g = float(np.cumsum(hist.grad[feature, :bin_ + 1])[-1])
    h = float(np.cumsum(hist.hess[feature, :bin_ + 1])[-1])
    n = int(hist.count[feature, :bin_ + 1].sum())
    return g, h, n


def best_split(hist: Histogram, n_bins_per_feature, g_parent, h_parent, n_parent,
               lam=1.0, gamma=0.0, min_samples_leaf=1) -> SplitCandidate | None:
    gains = split_gains(hist, n_bins_per_feature, g_parent, h_parent, n_parent,
                        lam, gamma, min_samples_leaf)
    best = pick_best(gains)
    if best is None:
        return None
    f, b = best
    gl, hl, nl = left_sums(hist, f, b)
    return SplitCandidate(int(f), int(b), float(gains[f, b]), gl, hl, nl)
