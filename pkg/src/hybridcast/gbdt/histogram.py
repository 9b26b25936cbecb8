"""Gradient/hessian histograms over binned (optionally bundled) features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .efb import FeatureBundle, bundle_columns, singleton_bundles


@dataclass(frozen=True)
class Histogram:
    grad: np.ndarray  # [n_columns, n_bins]
    hess: np.ndarray
    count: np.ndarray

    def __add__(self, other: "Histogram") -> "Histogram":
        return Histogram(self.grad + other.grad, self.hess + other.hess,
                         self.count + other.count)

    def __sub__(self, other: "Histogram") -> "Histogram":
        return Histogram(self.grad - other.grad, self.hess - other.hess,
                         self.count - other.count)


def build_histograms(binned, gradients, hessians, sample_weights, node_sample_indices,
                     n_bins: int | None = None, n_threads: int = 1) -> Histogram:
    """Histogram of one node.

    ``binned`` has shape [n_columns, n_samples]. Each cell sums
    ``weight * g`` (and ``weight * h``) over the node's samples in that bin,
    in ascending sample order.
    """
    binned = np.ascontiguousarray(binned, dtype=np.int32)
    if n_bins is None:
        n_bins = int(binned.max()) + 1 if binned.size else 1
    w = np.asarray(sample_weights, dtype=np.float64)
    wg = np.ascontiguousarray(w * np.asarray(gradients, dtype=np.float64))
    wh = np.ascontiguousarray(w * np.asarray(hessians, dtype=np.float64))
    idx = np.ascontiguousarray(np.sort(np.asarray(node_sample_indices, dtype=np.int64)))
    return Histogram(*kernels.build_histograms(binned, idx, wg, wh, int(n_bins), int(n_threads)))


def _alloc(rows: int, cols: int):
    return (np.zeros((rows, cols)), np.zeros((rows, cols)),
            np.zeros((rows, cols), dtype=np.int64))


class HistogramBuilder:
    """Builds node histograms on the bundled matrix and unpacks them into
    per-feature histograms.

    Bin 0 of every feature is recovered as node total minus the feature's
    other bins. This is what makes bundling exact: a bundled member's bin 0
    is spread over the shared bin 0 and the other members' ranges. Singleton
    bundles go through the same arithmetic, so bundled and unbundled training
    see identical numbers whenever the bundles are conflict-free.
    """

    def __init__(self, feature_bins, n_bins_per_feature, bundles: list[FeatureBundle] | None = None,
                 n_threads: int = 1):
        self.n_bins_per_feature = np.asarray(n_bins_per_feature, dtype=np.int32)
        self.n_features = self.n_bins_per_feature.size
        if bundles is None:
            bundles = singleton_bundles(self.n_bins_per_feature)
        self.bundles = bundles
        self.bundled = np.ascontiguousarray(bundle_columns(feature_bins, bundles))
        self.n_bundle_bins = max(b.n_bins for b in bundles) if bundles else 1
        self.n_threads = n_threads

        self.width = int(self.n_bins_per_feature.max()) if self.n_features else 1
        self._feat_col = np.zeros(self.n_features, dtype=np.int32)
        self._feat_off = np.zeros(self.n_features, dtype=np.int32)
        for c, bundle in enumerate(bundles):
            for m, off in zip(bundle.members, bundle.offsets):
                self._feat_col[m] = c
                self._feat_off[m] = off
        # workspaces reused across nodes; results are only valid until the next call
        n_cols = self.bundled.shape[0]
        self._raw_buf = _alloc(n_cols, self.n_bundle_bins)
        self._feat_buf = _alloc(self.n_features, self.width)
        self.gains_buf = np.empty((self.n_features, max(self.width - 1, 1)))

    def raw(self, sample_indices, wg, wh) -> Histogram:
        return Histogram(*kernels.build_histograms(
            self.bundled, sample_indices, wg, wh, self.n_bundle_bins, self.n_threads,
            self._raw_buf))

    def per_feature(self, raw: Histogram, g_total: float, h_total: float,
                    n_total: int) -> Histogram:
        return Histogram(*kernels.unpack_histograms(
            raw.grad, raw.hess, raw.count, self._feat_col, self._feat_off,
            self.n_bins_per_feature, self.width, float(g_total), float(h_total), int(n_total),
            self._feat_buf))

    def node(self, sample_indices, wg, wh, g_total, h_total, n_total) -> Histogram:
        return self.per_feature(self.raw(sample_indices, wg, wh), g_total, h_total, n_total)
