"""Regression trees grown on histograms: best-first (leaf-wise) and
oblivious (one shared split per level)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .histogram import HistogramBuilder
from .split import left_sums, pick_best, split_gains

LEAFWISE = "leafwise"
OBLIVIOUS = "oblivious"


def leaf_value(g: float, h: float, lam: float) -> float:
    denom = h + lam
    return -g / denom if denom != 0.0 else 0.0


@dataclass
class Tree:
    """Flattened node arrays. Leaves have ``feature == -1``; node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    mode: str = LEAFWISE

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.predict_tree(X, self.feature, self.threshold, self.left,
                                    self.right, self.value)

    def depth_of_nodes(self) -> np.ndarray:
        depth = np.zeros(self.feature.size, dtype=np.int64)
        for node in range(self.feature.size):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return depth

    def level_splits(self) -> list[set[tuple[int, float]]]:
        """Distinct (feature, threshold) pairs used at each depth."""
        depth = self.depth_of_nodes()
        levels: dict[int, set] = {}
        for node in np.flatnonzero(self.feature >= 0):
            levels.setdefault(int(depth[node]), set()).add(
                (int(self.feature[node]), float(self.threshold[node])))
        return [levels[d] for d in sorted(levels)]

    def is_oblivious(self) -> bool:
        """Every level shares one split and every leaf sits at the same depth."""
        depth = self.depth_of_nodes()
        leaf_depths = set(depth[self.feature < 0].tolist())
        return len(leaf_depths) == 1 and all(len(s) == 1 for s in self.level_splits())

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        return cls(
            np.asarray(doc["feature"], dtype=np.int32),
            np.asarray(doc["threshold"], dtype=np.float64),
            np.asarray(doc["left"], dtype=np.int32),
            np.asarray(doc["right"], dtype=np.int32),
            np.asarray(doc["value"], dtype=np.float64),
            doc.get("mode", LEAFWISE),
        )


class _NodeArrays:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def finish(self, mode: str) -> Tree:
        return Tree(np.asarray(self.feature, dtype=np.int32),
                    np.asarray(self.threshold, dtype=np.float64),
                    np.asarray(self.left, dtype=np.int32),
                    np.asarray(self.right, dtype=np.int32),
                    np.asarray(self.value, dtype=np.float64), mode)


@dataclass
class TrainingView:
    """Everything a grower needs about the (binned) training matrix."""

    feature_bins: np.ndarray  # [n_features, n_samples] int32, unbundled
    edges: list[np.ndarray]
    builder: HistogramBuilder

    @property
    def n_bins_per_feature(self) -> np.ndarray:
        return self.builder.n_bins_per_feature


def _node_totals(idx, wg, wh):
    g = float(np.cumsum(wg[idx])[-1]) if idx.size else 0.0
    h = float(np.cumsum(wh[idx])[-1]) if idx.size else 0.0
    return g, h, int(idx.size)


def grow_tree_leafwise(view: TrainingView, wg, wh, sample_indices, max_leaves: int,
                       lam: float, gamma: float, min_samples_leaf: int) -> Tree:
    """Best-first growth: always split the leaf with the highest gain.

    ``wg``/``wh`` are full-length weighted gradients/hessians; only
    ``sample_indices`` take part.
    """
    nb = view.n_bins_per_feature
    nodes = _NodeArrays()

    def evaluate(idx):
        g, h, n = _node_totals(idx, wg, wh)
        hist = view.builder.node(idx, wg, wh, g, h, n)
        gains = split_gains(hist, nb, g, h, n, lam, gamma, min_samples_leaf,
                            view.builder.gains_buf)
        best = pick_best(gains)
        split = None
        if best is not None:
            f, b = best
            split = (float(gains[f, b]), int(f), int(b), left_sums(hist, f, b))
        return g, h, n, split

    idx = np.asarray(sample_indices, dtype=np.int64)
    root = nodes.add_leaf(0.0)
    # leaf record: node id, sample indices, totals, split
    leaves = [(root, idx) + evaluate(idx)]
    while len(leaves) < max_leaves:
        best_k, best_gain = -1, 0.0
        for k, leaf in enumerate(leaves):
            split = leaf[5]
            if split is not None and split[0] > best_gain:
                best_k, best_gain = k, split[0]
        if best_k < 0:
            break
        node, idx, g, h, n, (gain, f, b, (gl, hl, nl)) = leaves.pop(best_k)
        go_left = view.feature_bins[f, idx] <= b
        left_idx, right_idx = idx[go_left], idx[~go_left]
        lnode, rnode = nodes.add_leaf(0.0), nodes.add_leaf(0.0)
        nodes.feature[node] = f
        nodes.threshold[node] = float(view.edges[f][b])
        nodes.left[node], nodes.right[node] = lnode, rnode
        # keep creation order so ties favour older leaves
        leaves.insert(best_k, (rnode, right_idx) + evaluate(right_idx))
        leaves.insert(best_k, (lnode, left_idx) + evaluate(left_idx))

    for node, _, g, h, _, _ in leaves:
        nodes.value[node] = leaf_value(g, h, lam)
    return nodes.finish(LEAFWISE)


def grow_tree_oblivious(view: TrainingView, wg, wh, sample_indices, depth: int,
                        lam: float, gamma: float) -> Tree:
    """Symmetric tree: one (feature, threshold) per level, applied to every node.

    The level split maximises the gain summed over all current nodes; growth
    stops early at a level where no candidate has positive summed gain.
    """
    nb = view.n_bins_per_feature
    parts = [np.asarray(sample_indices, dtype=np.int64)]
    levels: list[tuple[int, int]] = []
    for _ in range(depth):
        total = None
        for idx in parts:
            g, h, n = _node_totals(idx, wg, wh)
            hist = view.builder.node(idx, wg, wh, g, h, n)
            gains = split_gains(hist, nb, g, h, n, lam, gamma, 0, view.builder.gains_buf)
            if total is None:
                total = gains.copy()
            else:
                total += gains
        best = pick_best(total)
        if best is None:
            break
        f, b = best
        levels.append((int(f), int(b)))
        nxt = []
        for idx in parts:
            go_left = view.feature_bins[f, idx] <= b
            nxt.extend((idx[go_left], idx[~go_left]))
        parts = nxt

    d = len(levels)
    n_internal = (1 << d) - 1
    n_nodes = (1 << (d + 1)) - 1
    feature = np.full(n_nodes, -1, dtype=np.int32)
    threshold = np.zeros(n_nodes, dtype=np.float64)
    left = np.full(n_nodes, -1, dtype=np.int32)
    right = np.full(n_nodes, -1, dtype=np.int32)
    value = np.zeros(n_nodes, dtype=np.float64)
    for node in range(n_internal):
        f, b = levels[(node + 1).bit_length() - 1]
        feature[node] = f
        threshold[node] = view.edges[f][b]
        left[node], right[node] = 2 * node + 1, 2 * node + 2
    for k, idx in enumerate(parts):
        g, h, _ = _node_totals(idx, wg, wh)
        value[n_internal + k] = leaf_value(g, h, lam)
    return Tree(feature, threshold, left, right, value, OBLIVIOUS)
