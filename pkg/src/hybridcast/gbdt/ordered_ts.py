"""Ordered target statistics for categorical columns.

Row i is encoded only from rows that precede it in a random permutation,
so its own target never leaks into its encoding.
"""
from __future__ import annotations

import numpy as np


def ordered_target_stats(categories, targets, prior_weight: float, permutation,
                         initial_prior: float = 0.0) -> np.ndarray:
    """Leakage-free encoding of one categorical column.

    For row i with category c::

        (sum of y_j over earlier rows with category c + w * prior_i)
        / (count of those rows + w)

    where ``prior_i`` is the mean target of all rows earlier in the
    permutation (``initial_prior`` for the very first row).
    """
    cats = np.asarray(categories)
    y = np.asarray(targets, dtype=np.float64)
    perm = np.asarray(permutation, dtype=np.int64)
    if prior_weight <= 0:
        raise ValueError("prior_weight must be positive")
    if perm.shape != cats.shape or not np.array_equal(np.sort(perm), np.arange(cats.size)):
        raise ValueError("permutation must be a bijection on row indices")
    out = np.empty(cats.size, dtype=np.float64)
    sums: dict = {}
    counts: dict = {}
    total, seen = 0.0, 0
    # perm[k] is the row visited k-th
    for row in perm:
        c = cats[row].item()
        prior = total / seen if seen else initial_prior
        s, k = sums.get(c, 0.0), counts.get(c, 0)
        out[row] = (s + prior_weight * prior) / (k + prior_weight)
        sums[c] = s + y[row]
        counts[c] = k + 1
        total += y[row]
        seen += 1
    return out


class CategoryEncoder:
    """Ordered statistics at fit time, full-data statistics at predict time."""

    def __init__(self, prior_weight: float = 1.0, initial_prior: float = 0.0):
        self.prior_weight = prior_weight
        self.initial_prior = initial_prior
        self.prior = initial_prior
        self.stats: list[dict[int, tuple[float, int]]] = []

    def fit_transform(self, categories, targets, permutation) -> np.ndarray:
        cats = np.asarray(categories, dtype=np.int64)
        if cats.ndim == 1:
            cats = cats[:, None]
        y = np.asarray(targets, dtype=np.float64)
        self.prior = float(np.mean(y))
        self.stats = []
        cols = []
        for j in range(cats.shape[1]):
            cols.append(ordered_target_stats(cats[:, j], y, self.prior_weight, permutation,
                                             self.initial_prior))
            table = {}
            for c in np.unique(cats[:, j]):
                mask = cats[:, j] == c
                table[int(c)] = (float(y[mask].sum()), int(mask.sum()))
            self.stats.append(table)
        return np.column_stack(cols)

    def transform(self, categories) -> np.ndarray:
        cats = np.asarray(categories, dtype=np.int64)
        if cats.ndim == 1:
            cats = cats[:, None]
        w = self.prior_weight
        out = np.empty(cats.shape, dtype=np.float64)
        for j, table in enumerate(self.stats):
            for r, c in enumerate(cats[:, j]):
                s, k = table.get(int(c), (0.0, 0))
                out[r, j] = (s + w * self.prior) / (k + w)
        return out

    def to_dict(self) -> dict:
        return {
            "prior_weight": self.prior_weight,
            "initial_prior": self.initial_prior,
            "prior": self.prior,
            "stats": [[[c, s, k] for c, (s, k) in sorted(t.items())] for t in self.stats],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CategoryEncoder":
        enc = cls(doc["prior_weight"], doc["initial_prior"])
        enc.prior = doc["prior"]
        enc.stats = [{int(c): (float(s), int(k)) for c, s, k in t} for t in doc["stats"]]
        return enc
