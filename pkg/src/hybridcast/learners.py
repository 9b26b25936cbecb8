"""The three base forecasters behind one interface: windows in, next target out."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .dataframe import WindowedDataset
from .errors import ConfigInvalid, DimensionMismatch
from .gbdt import BoostConfig, GbdtModel, GossConfig, fit_gbdt
from .gbdt.tree import LEAFWISE, OBLIVIOUS
from .lstm import LstmConfig, LstmModel, fit_lstm
from .pipeline import tabularize

OBLIVIOUS_KIND = "gbdt-oblivious"
LEAFWISE_KIND = "gbdt-leafwise"
LSTM_KIND = "lstm"
# column order of every prediction triple, matching the (alpha, beta, gamma) weights
BASE_KINDS = (OBLIVIOUS_KIND, LSTM_KIND, LEAFWISE_KIND)


def default_config(kind: str):
    if kind == OBLIVIOUS_KIND:
        return BoostConfig(mode=OBLIVIOUS, depth=6, n_iterations=100, learning_rate=0.1)
    if kind == LEAFWISE_KIND:
        return BoostConfig(mode=LEAFWISE, max_leaves=31, n_iterations=100, learning_rate=0.1,
                           goss=GossConfig(0.2, 0.1), efb=True)
    if kind == LSTM_KIND:
        return LstmConfig()
    raise ConfigInvalid(f"unknown model kind {kind!r}")


def config_from_dict(kind: str, doc: dict | None):
    """Defaults for ``kind`` overlaid with ``doc``."""
    base = default_config(kind).to_dict()
    base.update(doc or {})
    if kind == LSTM_KIND:
        return LstmConfig.from_dict(base)
    return BoostConfig.from_dict(base)


def direction_codes(inputs, target_index: int) -> np.ndarray:
    """Sign of the last target change in each window: 0 down, 1 flat, 2 up."""
    X = np.asarray(inputs, dtype=np.float64)
    if X.shape[1] < 2:
        return np.ones((X.shape[0], 1), dtype=np.int64)
    step = X[:, -1, target_index] - X[:, -2, target_index]
    return (np.sign(step).astype(np.int64) + 1)[:, None]


@dataclass
class Forecaster:
    """A trained base model plus how to feed it windows."""

    kind: str
    model: GbdtModel | LstmModel
    lookback: int
    n_features: int
    target_index: int

    def predict(self, inputs) -> np.ndarray:
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 3 or X.shape[1:] != (self.lookback, self.n_features):
            raise DimensionMismatch(
                f"expected windows [n, {self.lookback}, {self.n_features}], got {X.shape}")
        if self.kind == LSTM_KIND:
            return self.model.predict(X)
        if X.shape[0] == 0:
            return np.zeros(0)
        categorical = direction_codes(X, self.target_index) if self.kind == OBLIVIOUS_KIND else None
        return self.model.predict(tabularize(X), categorical)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lookback": self.lookback, "n_features": self.n_features,
                "target_index": self.target_index, "model": self.model.to_dict()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Forecaster":
        kind = doc["kind"]
        model = LstmModel.from_dict(doc["model"]) if kind == LSTM_KIND else GbdtModel.from_dict(doc["model"])
        return cls(kind, model, int(doc["lookback"]), int(doc["n_features"]), int(doc["target_index"]))


def target_index(ds: WindowedDataset) -> int:
    names = list(ds.feature_names)
    return names.index(ds.target_name) if ds.target_name in names else 0


def fit_forecaster(kind: str, train: WindowedDataset, config=None, seed: int | None = None,
                   n_threads: int = 1) -> Forecaster:
    """Train one base learner; ``seed`` (when given) overrides the config's."""
    config = config if config is not None else default_config(kind)
    if seed is not None:
        config = dataclasses.replace(config, seed=int(seed))
    tix = target_index(train)
    if kind == LSTM_KIND:
        model = fit_lstm(train, config)
    elif kind in (OBLIVIOUS_KIND, LEAFWISE_KIND):
        categorical = direction_codes(train.inputs, tix) if kind == OBLIVIOUS_KIND else None
        model = fit_gbdt(tabularize(train.inputs), train.targets, config, categorical, n_threads)
    else:
        raise ConfigInvalid(f"unknown model kind {kind!r}")
    return Forecaster(kind, model, train.lookback, train.n_features, tix)
