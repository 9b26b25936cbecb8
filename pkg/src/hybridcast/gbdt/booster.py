"""Gradient boosting driver, model container and JSON persistence."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..errors import ConfigInvalid, DimensionMismatch
from .binning import BinMapper
from .efb import efb_bundle
from .goss import GossConfig, goss_sample
from .histogram import HistogramBuilder
from .ordered_ts import CategoryEncoder
from .tree import LEAFWISE, OBLIVIOUS, Tree, TrainingView, grow_tree_leafwise, grow_tree_oblivious

FORMAT_VERSION = 1


@dataclass(frozen=True)
class BoostConfig:
    n_iterations: int = 100
    learning_rate: float = 0.1
    lam: float = 1.0
    gamma: float = 0.0
    max_leaves: int = 31
    depth: int = 6
    n_bins: int = 256
    min_samples_leaf: int = 5
    goss: GossConfig | None = None
    mode: str = LEAFWISE
    seed: int = 0
    efb: bool = True
    conflict_budget: int = 0
    prior_weight: float = 1.0

    def validate(self) -> "BoostConfig":
        problems = []
        if self.n_iterations < 0:
            problems.append("n_iterations must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            problems.append("learning_rate must lie in (0, 1]")
        if self.lam < 0 or self.gamma < 0:
            problems.append("lam and gamma must be nonnegative")
        if self.max_leaves < 1:
            problems.append("max_leaves must be positive")
        if self.depth < 1:
            problems.append("depth must be positive")
        if self.n_bins < 2:
            problems.append("n_bins must be >= 2")
        if self.min_samples_leaf < 1:
            problems.append("min_samples_leaf must be positive")
        if self.mode not in (LEAFWISE, OBLIVIOUS):
            problems.append(f"mode must be {LEAFWISE!r} or {OBLIVIOUS!r}")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        if self.conflict_budget < 0 or self.prior_weight <= 0:
            problems.append("conflict_budget >= 0 and prior_weight > 0 required")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["goss"] = self.goss.to_dict() if self.goss is not None else None
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "BoostConfig":
        doc = dict(doc)
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigInvalid(f"unknown gbdt option(s): {', '.join(sorted(unknown))}")
        goss = doc.get("goss")
        try:
            if isinstance(goss, dict):
                doc["goss"] = GossConfig(**goss)
            return cls(**doc).validate()
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None


@dataclass
class GbdtModel:
    """``F(x) = F_0 + lr * sum_m tree_m(x)``."""

    config: BoostConfig
    base_prediction: float
    learning_rate: float
    n_features: int
    bin_edges: list[np.ndarray]
    trees: list[Tree] = field(default_factory=list)
    encoder: CategoryEncoder | None = None
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_categorical(self) -> int:
        return len(self.encoder.stats) if self.encoder is not None else 0

    def _design(self, X, categorical=None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        if self.encoder is not None:
            if categorical is None:
                raise DimensionMismatch("model was trained with categorical columns")
            enc = self.encoder.transform(categorical)
            if enc.shape[0] != X.shape[0]:
                raise DimensionMismatch("categorical rows do not match feature rows")
            X = np.hstack([X, enc])
        return np.ascontiguousarray(X)

    def predict(self, X, categorical=None) -> np.ndarray:
        X = self._design(X, categorical)
        out = np.full(X.shape[0], self.base_prediction)
        for tree in self.trees:
            out = out + self.learning_rate * tree.predict(X)
        return out

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "gbdt",
            "config": self.config.to_dict(),
            "base_prediction": self.base_prediction,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "bin_edges": [e.tolist() for e in self.bin_edges],
            "trees": [t.to_dict() for t in self.trees],
            "encoder": self.encoder.to_dict() if self.encoder is not None else None,
            "train_loss": list(self.train_loss),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GbdtModel":
        if doc.get("kind") != "gbdt":
            raise ValueError("not a gbdt model document")
        enc = doc.get("encoder")
        return cls(
            BoostConfig.from_dict(doc["config"]),
            float(doc["base_prediction"]),
            float(doc["learning_rate"]),
            int(doc["n_features"]),
            [np.asarray(e, dtype=np.float64) for e in doc["bin_edges"]],
            [Tree.from_dict(t) for t in doc["trees"]],
            CategoryEncoder.from_dict(enc) if enc is not None else None,
            [float(v) for v in doc.get("train_loss", [])],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "GbdtModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _streams(seed: int):
    perm_seq, goss_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(perm_seq), np.random.default_rng(goss_seq)


def fit_gbdt(X, y, config: BoostConfig | None = None, categorical=None,
             n_threads: int = 1) -> GbdtModel:
    """Boost squared-error regression trees.

    Each iteration uses ``g = F - y`` and ``h = 1``, optionally GOSS-samples
    the rows, grows one tree in the configured mode and adds it scaled by
    the learning rate. ``categorical`` (integer codes) is encoded with
    ordered target statistics over one seeded permutation. ``n_threads``
    only spreads histogram columns over threads; results do not depend on it.
    """
    config = (config or BoostConfig()).validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigInvalid("training data must be a non-empty 2-D array")
    if X.shape[0] != y.size:
        raise DimensionMismatch("X and y have different numbers of rows")
    n, n_features = X.shape
    perm_rng, goss_rng = _streams(config.seed)

    encoder = None
    design = X
    if categorical is not None:
        encoder = CategoryEncoder(config.prior_weight)
        encoded = encoder.fit_transform(categorical, y, perm_rng.permutation(n))
        design = np.hstack([X, encoded])
    design = np.ascontiguousarray(design)

    mapper = BinMapper(config.n_bins).fit(design)
    feature_bins = mapper.transform(design)
    nb = mapper.n_bins_per_feature
    bundles = efb_bundle(feature_bins, nb, config.conflict_budget) if config.efb else None
    view = TrainingView(feature_bins, mapper.edges,
                        HistogramBuilder(feature_bins, nb, bundles, n_threads))

    base = float(np.mean(y))
    model = GbdtModel(config, base, config.learning_rate, n_features, mapper.edges,
                      encoder=encoder)
    F = np.full(n, base)
    model.train_loss.append(float(np.mean((F - y) ** 2)))
    all_rows = np.arange(n, dtype=np.int64)
    hess = np.ones(n)
    for m in range(config.n_iterations):
        grad = F - y
        if config.goss is not None and m >= config.goss.warmup_iterations:
            rows, weights = goss_sample(grad, config.goss, goss_rng)
            w = np.zeros(n)
            w[rows] = weights
        else:
            rows, w = all_rows, np.ones(n)
        wg = np.ascontiguousarray(w * grad)
        wh = np.ascontiguousarray(w * hess)
        if config.mode == LEAFWISE:
            tree = grow_tree_leafwise(view, wg, wh, rows, config.max_leaves, config.lam,
                                      config.gamma, config.min_samples_leaf)
        else:
            tree = grow_tree_oblivious(view, wg, wh, rows, config.depth, config.lam,
                                       config.gamma)
        model.trees.append(tree)
        F = F + config.learning_rate * tree.predict(design)
        model.train_loss.append(float(np.mean((F - y) ** 2)))
    return model


def predict_gbdt(model: GbdtModel, feature_row, categorical=None):
    """Prediction for one row (1-D input) or many rows (2-D input)."""
    row = np.asarray(feature_row, dtype=np.float64)
    if categorical is not None and row.ndim == 1:
        categorical = np.atleast_2d(categorical)
    out = model.predict(row, categorical)
    return float(out[0]) if row.ndim == 1 else out
