"""Quantile bin edges and the raw-value -> bin-index mapping."""
from __future__ import annotations

import numpy as np


def compute_bin_edges(column, n_bins: int = 256) -> np.ndarray:
    """At most ``n_bins - 1`` strictly increasing split edges.

    Columns with few distinct values get one edge between each neighbouring
    pair (midpoints), so every distinct value owns a bin. Otherwise edges sit
    at the empirical quantiles k/n_bins, with duplicates collapsed. A value
    ``x`` falls in bin ``k`` when ``edges[k-1] < x <= edges[k]``.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    col = np.asarray(column, dtype=np.float64).ravel()
    if col.size == 0:
        raise ValueError("cannot bin an empty column")
    distinct = np.unique(col)
    if distinct.size <= 1:
        return np.empty(0, dtype=np.float64)
    if distinct.size <= n_bins:
        return (distinct[:-1] + distinct[1:]) * 0.5
    qs = np.quantile(col, np.arange(1, n_bins) / n_bins)
    edges = np.unique(qs)
    # the top edge must leave something on its right
    return edges[edges < distinct[-1]]


class BinMapper:
    """Per-feature bin edges fitted on training data."""

    def __init__(self, n_bins: int = 256):
        self.n_bins = n_bins
        self.edges: list[np.ndarray] = []

    def fit(self, X) -> "BinMapper":
        X = np.asarray(X, dtype=np.float64)
        self.edges = [compute_bin_edges(X[:, j], self.n_bins) for j in range(X.shape[1])]
        return self

    @property
    def n_bins_per_feature(self) -> np.ndarray:
        return np.array([e.size + 1 for e in self.edges], dtype=np.int32)

    def transform(self, X) -> np.ndarray:
        """Bins as an int32 array of shape [n_features, n_samples]."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[1], X.shape[0]), dtype=np.int32)
        for j, edges in enumerate(self.edges):
            out[j] = np.searchsorted(edges, X[:, j], side="left")
        return out
