"""LSTM regressor: configuration, seeded mini-batch training and persistence."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from ..errors import ConfigInvalid, DimensionMismatch
from .network import LstmParams, init_params, lstm_backward, lstm_forward
from .optim import AdamState, adam_step

FORMAT_VERSION = 1


@dataclass(frozen=True)
class LstmConfig:
    hidden_size: int = 32
    n_layers: int = 1
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 0.005
    gradient_clip_norm: float = 5.0
    seed: int = 0
    forget_bias: float = 1.0

    def validate(self) -> "LstmConfig":
        problems = []
        if self.hidden_size < 1:
            problems.append("hidden_size must be >= 1")
        if self.n_layers not in (1, 2):
            problems.append("n_layers must be 1 or 2")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if not self.learning_rate > 0:
            problems.append("learning_rate must be positive")
        if self.gradient_clip_norm < 0:
            problems.append("gradient_clip_norm must be >= 0 (0 disables clipping)")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "LstmConfig":
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigInvalid(f"unknown lstm option(s): {', '.join(sorted(unknown))}")
        try:
            return cls(**doc).validate()
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None


def streams(seed: int):
    """Independent generators for initialization and batch shuffling."""
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(shuffle_seq)


BatchLoss = Callable[[LstmParams, np.ndarray], "tuple[float, LstmParams]"]


def train_minibatch(params: LstmParams, n_samples: int, batch_loss: BatchLoss,
                    config: LstmConfig, rng: np.random.Generator) -> list[float]:
    """Adam over shuffled mini-batches; returns the mean loss of each epoch.

    ``batch_loss(params, rows)`` gives the batch loss and its gradients. The
    final partial batch of an epoch is kept.
    """
    state = AdamState.for_params(params)
    clip = config.gradient_clip_norm or None
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(n_samples)
        total = 0.0
        for start in range(0, n_samples, config.batch_size):
            rows = np.sort(order[start:start + config.batch_size])
            loss, grads = batch_loss(params, rows)
            total += loss * rows.size
            adam_step(params, grads, state, config.learning_rate, clip)
        history.append(total / n_samples)
    return history


@dataclass
class LstmModel:
    config: LstmConfig
    params: LstmParams
    train_loss: list[float] = field(default_factory=list)

    def predict(self, inputs) -> np.ndarray:
        """Final-step predictions for windows shaped [n, lookback, n_features]."""
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 3:
            raise DimensionMismatch("inputs must be [n_samples, lookback, n_features]")
        if X.shape[0] == 0:
            return np.zeros(0)
        out, _ = lstm_forward(self.params, X)
        return out[:, 0]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "lstm",
            "config": self.config.to_dict(),
            "params": self.params.to_dict(),
            "train_loss": list(self.train_loss),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LstmModel":
        if doc.get("kind") != "lstm":
            raise ValueError("not an lstm model document")
        config = LstmConfig.from_dict(doc["config"])
        params = LstmParams.from_dict(doc["params"], config.n_layers)
        return cls(config, params, [float(v) for v in doc.get("train_loss", [])])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "LstmModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_lstm(windows, config: LstmConfig | None = None,
             init: LstmParams | None = None) -> LstmModel:
    """Train a one-output regressor on final-step squared error.

    ``windows`` is a ``WindowedDataset`` (or anything with ``inputs`` and
    ``targets``). ``init`` replaces the seeded initialization.
    """
    config = (config or LstmConfig()).validate()
    X = np.asarray(windows.inputs, dtype=np.float64)
    y = np.asarray(windows.targets, dtype=np.float64).ravel()
    if X.ndim != 3 or X.shape[0] == 0:
        raise ConfigInvalid("training windows must be a non-empty [n, lookback, features] array")
    if X.shape[0] != y.size:
        raise DimensionMismatch("inputs and targets have different lengths")
    init_rng, shuffle_rng = streams(config.seed)
    if init is None:
        params = init_params(X.shape[2], config.hidden_size, 1, config.n_layers, init_rng,
                             forget_bias=config.forget_bias)
    else:
        params = init.copy()
        if params.input_size != X.shape[2] or len(params.layers) != config.n_layers:
            raise DimensionMismatch("initial params do not match the data or config")

    def batch_loss(p, rows):
        out, cache = lstm_forward(p, X[rows])
        diff = out[:, 0] - y[rows]
        loss = 0.5 * float(np.mean(diff * diff))
        grads = lstm_backward(p, cache, (diff / rows.size)[:, None])
        return loss, grads

    history = train_minibatch(params, X.shape[0], batch_loss, config, shuffle_rng)
    return LstmModel(config, params, history)
