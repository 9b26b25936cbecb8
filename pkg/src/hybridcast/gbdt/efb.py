"""Exclusive feature bundling.

Bin 0 of a binned feature means "absent". Features that are rarely
non-absent on the same row share one histogram column; each member's
non-zero bins are shifted by an offset so they occupy disjoint ranges.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FeatureBundle:
    members: tuple[int, ...]
    offsets: tuple[int, ...]
    n_bins: int  # bins of the bundled column, shared bin 0 included

    def decode(self, bundled_bin: int) -> tuple[int, int] | None:
        """Map a bundled bin back to (feature, original bin); None for bin 0."""
        if bundled_bin == 0:
            return None
        for member, off, nxt in zip(self.members, self.offsets,
                                    self.offsets[1:] + (self.n_bins - 1,)):
            if off < bundled_bin <= nxt:
                return member, bundled_bin - off
        raise ValueError(f"bin {bundled_bin} outside bundle range")


def conflict_counts(feature_bins) -> np.ndarray:
    """[F, F] number of rows on which both features are non-absent."""
    nz = (np.asarray(feature_bins) != 0).astype(np.float64)
    return (nz @ nz.T).astype(np.int64)


def efb_bundle(feature_bins, n_bins_per_feature=None, conflict_budget: int = 0,
               max_bundle_bins: int = 1 << 16) -> list[FeatureBundle]:
    """Greedy bundling: densest features first, each into the first bundle
    whose every member conflicts with it on at most ``conflict_budget`` rows."""
    feature_bins = np.asarray(feature_bins)
    if n_bins_per_feature is None:
        n_bins_per_feature = feature_bins.max(axis=1) + 1
    nb = np.asarray(n_bins_per_feature, dtype=np.int64)
    conflicts = conflict_counts(feature_bins)
    nnz = np.diag(conflicts)
    order = np.argsort(-nnz, kind="stable")

    groups: list[list[int]] = []
    sizes: list[int] = []
    for f in order:
        f = int(f)
        for k, members in enumerate(groups):
            if sizes[k] + nb[f] - 1 > max_bundle_bins:
                continue
            if all(conflicts[f, m] <= conflict_budget for m in members):
                members.append(f)
                sizes[k] += int(nb[f]) - 1
                break
        else:
            groups.append([f])
            sizes.append(int(nb[f]))

    bundles = []
    for members in groups:
        offsets, off = [], 0
        for m in members:
            offsets.append(off)
            off += int(nb[m]) - 1
        bundles.append(FeatureBundle(tuple(members), tuple(offsets), off + 1))
    return bundles


def singleton_bundles(n_bins_per_feature) -> list[FeatureBundle]:
    return [FeatureBundle((f,), (0,), int(n)) for f, n in enumerate(n_bins_per_feature)]


def bundle_columns(feature_bins, bundles) -> np.ndarray:
    """Bundled int32 matrix [n_bundles, n_samples]; on a conflict the later member wins."""
    feature_bins = np.asarray(feature_bins)
    out = np.zeros((len(bundles), feature_bins.shape[1]), dtype=np.int32)
    for c, bundle in enumerate(bundles):
        for m, off in zip(bundle.members, bundle.offsets):
            col = feature_bins[m]
            hit = col != 0
            out[c, hit] = col[hit] + off
    return out
