"""Stacking: walk-forward out-of-fold base predictions, a two-layer LSTM
meta-learner emitting per-step simplex weights, and the convex blend."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataframe import WindowedDataset
from .errors import ConfigInvalid, DimensionMismatch, EmptyOof, LengthMismatch, TooFewSamples
from .learners import BASE_KINDS, Forecaster, config_from_dict, default_config, fit_forecaster
from .lstm import LstmConfig, LstmParams, init_params, lstm_backward, lstm_forward, streams, train_minibatch

N_BASE = len(BASE_KINDS)
DEFAULT_META = LstmConfig(hidden_size=16, n_layers=2, epochs=80, batch_size=32,
                          learning_rate=0.01)


@dataclass(frozen=True)
class OofMatrix:
    """Out-of-fold base predictions; columns follow ``BASE_KINDS``."""

    predictions: np.ndarray  # [n, 3]
    targets: np.ndarray
    fold_ids: np.ndarray  # 1-based fold of each row, always >= 2
    timestamps: np.ndarray
    rows: np.ndarray  # position of each row in the training windows

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    def tail(self, count: int) -> "OofMatrix":
        sl = slice(max(len(self) - count, 0), len(self))
        return OofMatrix(self.predictions[sl], self.targets[sl], self.fold_ids[sl],
                         self.timestamps[sl], self.rows[sl])


@dataclass(frozen=True)
class MetaWeights:
    """Per-step (alpha, beta, gamma) for the (oblivious, lstm, leafwise) predictions."""

    values: np.ndarray  # [n, 3]

    @property
    def alpha(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def beta(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def gamma(self) -> np.ndarray:
        return self.values[:, 2]

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def check(self, tol: float = 1e-9) -> bool:
        v = self.values
        return bool(np.all(v >= 0.0) and np.all(np.abs(v.sum(axis=1) - 1.0) <= tol))


def fold_partition(n: int, k_folds: int) -> list[np.ndarray]:
    """Contiguous chronological folds of near-equal size."""
    if k_folds < 2:
        raise ConfigInvalid("k_folds must be >= 2")
    if n < 2 * k_folds:
        raise TooFewSamples(f"{n} training samples cannot fill {k_folds} folds of at least 2")
    return np.array_split(np.arange(n), k_folds)


def _fit_bases(kinds, train: WindowedDataset, configs: dict, seed: int, workers: int,
               n_threads: int) -> dict[str, Forecaster]:
    def one(kind):
        return fit_forecaster(kind, train, configs.get(kind), seed, n_threads)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return dict(zip(kinds, pool.map(one, kinds)))
    return {kind: one(kind) for kind in kinds}


def stack_predictions(bases: dict[str, Forecaster], inputs) -> np.ndarray:
    return np.column_stack([bases[kind].predict(inputs) for kind in BASE_KINDS])


def oof_predictions(train: WindowedDataset, base_configs: dict | None = None, k_folds: int = 5,
                    seed: int = 0, workers: int = 1, n_threads: int = 1) -> OofMatrix:
    """Walk-forward stacking features.

    Fold ``j`` is predicted by models trained on folds ``1..j-1``; fold 1
    has no predictor and is left out.
    """
    configs = base_configs or {}
    folds = fold_partition(len(train), k_folds)
    preds, fold_ids = [], []
    for j in range(1, k_folds):
        seen = train.subset(slice(0, int(folds[j][0])))
        bases = _fit_bases(BASE_KINDS, seen, configs, seed, workers, n_threads)
        preds.append(stack_predictions(bases, train.inputs[folds[j]]))
        fold_ids.append(np.full(folds[j].size, j + 1, dtype=np.int64))
    rows = np.concatenate(folds[1:])
    return OofMatrix(np.vstack(preds), train.targets[rows].copy(), np.concatenate(fold_ids),
                     train.sample_timestamps[rows].copy(), rows)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def trailing_windows(sequence: np.ndarray, window: int) -> np.ndarray:
    """All full-length windows of consecutive rows: [n - window + 1, window, d]."""
    view = np.lib.stride_tricks.sliding_window_view(sequence, window, axis=0)
    return np.ascontiguousarray(view.transpose(0, 2, 1))


def combine(weights, base_preds) -> np.ndarray:
    """Per-step convex blend of the three base predictions.

    The weighted sum is clipped into the step's [min, max] prediction range,
    which only absorbs rounding: equal predictions return that value.
    """
    w = weights.values if isinstance(weights, MetaWeights) else np.asarray(weights, dtype=np.float64)
    P = np.asarray(base_preds, dtype=np.float64)
    if w.ndim == 1:
        w = w[None, :]
    if P.ndim == 1:
        P = P[None, :]
    if w.shape != P.shape or P.shape[-1] != N_BASE:
        raise LengthMismatch(f"weights {w.shape} and predictions {P.shape} are not aligned")
    out = w[:, 0] * P[:, 0] + w[:, 1] * P[:, 1] + w[:, 2] * P[:, 2]
    return np.clip(out, P.min(axis=1), P.max(axis=1))


@dataclass
class MetaModel:
    """Two-layer LSTM over windows of prediction triples; 3 logits per step."""

    config: LstmConfig
    params: LstmParams
    window: int
    train_loss: list[float] = field(default_factory=list)

    def weights(self, sequences) -> MetaWeights:
        """Weights at the final step of each [n, T, 3] sequence."""
        X = np.asarray(sequences, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != N_BASE:
            raise DimensionMismatch("meta input must be [n, T, 3] prediction sequences")
        if X.shape[0] == 0:
            return MetaWeights(np.zeros((0, N_BASE)))
        logits, _ = lstm_forward(self.params, X)
        return MetaWeights(softmax(logits))

    def to_dict(self) -> dict:
        return {"kind": "meta", "config": self.config.to_dict(), "window": self.window,
                "params": self.params.to_dict(), "train_loss": list(self.train_loss)}

    @classmethod
    def from_dict(cls, doc: dict) -> "MetaModel":
        config = LstmConfig.from_dict(doc["config"])
        return cls(config, LstmParams.from_dict(doc["params"], config.n_layers), int(doc["window"]),
                   [float(v) for v in doc.get("train_loss", [])])


def meta_init(config: LstmConfig) -> LstmParams:
    """Seeded meta parameters; the zeroed head starts every weight at 1/3."""
    init_rng, _ = streams(config.seed)
    return init_params(N_BASE, config.hidden_size, N_BASE, config.n_layers, init_rng,
                       forget_bias=config.forget_bias, zero_head=True)


def fit_meta(oof: OofMatrix, meta_config: LstmConfig = DEFAULT_META, window: int = 21) -> MetaModel:
    """Train the meta-learner to minimise the blended squared error.

    Each training sample is the ``window`` consecutive OOF triples ending at
    a step; the loss uses that step's weights and target.
    """
    config = meta_config.validate()
    if config.n_layers != 2:
        raise ConfigInvalid("the meta-learner uses a two-layer LSTM")
    if len(oof) == 0:
        raise EmptyOof("no out-of-fold rows to train on")
    window = int(min(window, len(oof)))
    if window < 1:
        raise ConfigInvalid("meta window must be positive")
    seqs = trailing_windows(oof.predictions, window)
    P = oof.predictions[window - 1:]
    y = oof.targets[window - 1:]
    params = meta_init(config)
    _, shuffle_rng = streams(config.seed)

    def batch_loss(p, rows):
        logits, cache = lstm_forward(p, seqs[rows])
        w = softmax(logits)
        preds = P[rows]
        blend = np.sum(w * preds, axis=1)
        diff = blend - y[rows]
        loss = 0.5 * float(np.mean(diff * diff))
        d_blend = diff / rows.size
        d_logits = w * (preds - blend[:, None]) * d_blend[:, None]
        return loss, lstm_backward(p, cache, d_logits)

    history = train_minibatch(params, seqs.shape[0], batch_loss, config, shuffle_rng)
    return MetaModel(config, params, window, history)


@dataclass(frozen=True)
class EnsembleConfig:
    k_folds: int = 5
    meta: LstmConfig = DEFAULT_META
    meta_lookback: int | None = None  # warm-start length; defaults to the data lookback
    base: dict = field(default_factory=dict)  # kind -> BoostConfig / LstmConfig

    def validate(self) -> "EnsembleConfig":
        if self.k_folds < 2:
            raise ConfigInvalid("k_folds must be >= 2")
        if self.meta_lookback is not None and self.meta_lookback < 0:
            raise ConfigInvalid("meta_lookback must be >= 0")
        if self.meta.n_layers != 2:
            raise ConfigInvalid("the meta-learner uses a two-layer LSTM")
        self.meta.validate()
        return self

    def base_config(self, kind: str):
        return self.base.get(kind) or default_config(kind)

    def to_dict(self) -> dict:
        return {"k_folds": self.k_folds, "meta": self.meta.to_dict(),
                "meta_lookback": self.meta_lookback,
                "base": {k: self.base_config(k).to_dict() for k in BASE_KINDS}}

    @classmethod
    def from_dict(cls, doc: dict) -> "EnsembleConfig":
        doc = dict(doc or {})
        unknown = set(doc) - {"k_folds", "meta", "meta_lookback", "base"}
        if unknown:
            raise ConfigInvalid(f"unknown ensemble option(s): {', '.join(sorted(unknown))}")
        meta = DEFAULT_META.to_dict()
        meta.update(doc.get("meta") or {})
        base = {k: config_from_dict(k, v) for k, v in (doc.get("base") or {}).items()}
        try:
            return cls(int(doc.get("k_folds", 5)), LstmConfig.from_dict(meta),
                       doc.get("meta_lookback"), base).validate()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigInvalid):
                raise
            raise ConfigInvalid(str(exc)) from None


@dataclass
class EnsembleModel:
    bases: dict[str, Forecaster]
    meta: MetaModel
    history: OofMatrix  # trailing OOF triples that warm-start the meta at test time
    config: EnsembleConfig
    folds: list[tuple[int, int]] = field(default_factory=list)

    def to_dict(self, base_docs: dict | None = None) -> dict:
        """``base_docs`` may replace the embedded base documents (e.g. by file references)."""
        h = self.history
        return {
            "format_version": 1,
            "kind": "ensemble",
            "order": list(BASE_KINDS),
            "base": base_docs if base_docs is not None else
            {k: self.bases[k].to_dict() for k in BASE_KINDS},
            "meta": self.meta.to_dict(),
            "config": self.config.to_dict(),
            "folds": [list(f) for f in self.folds],
            "history": {"dates": [str(d) for d in h.timestamps],
                        "predictions": h.predictions.tolist(),
                        "targets": h.targets.tolist(),
                        "fold_ids": h.fold_ids.tolist(),
                        "rows": h.rows.tolist()},
        }

    @classmethod
    def from_dict(cls, doc: dict, bases: dict[str, Forecaster] | None = None) -> "EnsembleModel":
        if doc.get("kind") != "ensemble":
            raise ValueError("not an ensemble document")
        if bases is None:
            bases = {k: Forecaster.from_dict(d) for k, d in doc["base"].items()}
        h = doc["history"]
        history = OofMatrix(
            np.asarray(h["predictions"], dtype=np.float64).reshape(-1, N_BASE),
            np.asarray(h["targets"], dtype=np.float64),
            np.asarray(h["fold_ids"], dtype=np.int64),
            np.asarray(h["dates"], dtype="datetime64[D]"),
            np.asarray(h["rows"], dtype=np.int64))
        return cls(bases, MetaModel.from_dict(doc["meta"]), history,
                   EnsembleConfig.from_dict(doc["config"]),
                   [tuple(f) for f in doc.get("folds", [])])


def fit_ensemble(train: WindowedDataset, config: EnsembleConfig | None = None, seed: int = 0,
                 bases: dict[str, Forecaster] | None = None, workers: int = 1,
                 n_threads: int = 1) -> EnsembleModel:
    """OOF generation, meta training, then base refits on the whole training split.

    ``bases`` may supply already-refit base models (trained on ``train`` with
    the same configs and seed) to skip the refit.
    """
    config = (config or EnsembleConfig()).validate()
    configs = {k: config.base_config(k) for k in BASE_KINDS}
    oof = oof_predictions(train, configs, config.k_folds, seed, workers, n_threads)
    lookback = config.meta_lookback if config.meta_lookback is not None else train.lookback
    meta_cfg = dataclasses.replace(config.meta, seed=int(seed))
    meta = fit_meta(oof, meta_cfg, window=lookback + 1)
    if bases is None:
        bases = _fit_bases(BASE_KINDS, train, configs, seed, workers, n_threads)
    folds = [(int(f[0]), int(f[-1]) + 1) for f in fold_partition(len(train), config.k_folds)]
    return EnsembleModel(bases, meta, oof.tail(lookback), config, folds)


@dataclass(frozen=True)
class EnsemblePrediction:
    predictions: np.ndarray
    weights: MetaWeights
    base: np.ndarray  # [n, 3] triples actually blended


def predict_ensemble(model: EnsembleModel, test: WindowedDataset,
                     base: np.ndarray | None = None) -> EnsemblePrediction:
    """Blend base predictions for every window in ``test``.

    Steps are laid on one timeline with the stored OOF history (a history
    triple replaces the base triple on a shared date), and each step's
    weights come from the ``window`` triples ending at it. Steps with less
    history use the shorter sequence available.
    """
    n = len(test)
    if base is None:
        base = stack_predictions(model.bases, test.inputs) if n else np.zeros((0, N_BASE))
    base = np.asarray(base, dtype=np.float64)
    if base.shape != (n, N_BASE):
        raise DimensionMismatch("base predictions do not match the test windows")
    h = model.history
    dates = np.asarray(test.sample_timestamps, dtype="datetime64[D]")
    hist_dates = np.asarray(h.timestamps, dtype="datetime64[D]")
    used = base.copy()
    if hist_dates.size and n:
        pos = np.searchsorted(hist_dates, dates)
        hit = (pos < hist_dates.size) & (hist_dates[np.minimum(pos, hist_dates.size - 1)] == dates)
        used[hit] = h.predictions[pos[hit]]
    keep_hist = ~np.isin(hist_dates, dates)
    tl_dates = np.concatenate([hist_dates[keep_hist], dates])
    tl_preds = np.vstack([h.predictions[keep_hist], used])
    order = np.argsort(tl_dates, kind="stable")
    tl_preds = tl_preds[order]
    # timeline slot of each test step
    slot = np.empty_like(order)
    slot[order] = np.arange(order.size)
    step_pos = slot[int(keep_hist.sum()) + np.arange(n)]

    W = model.meta.window
    weights = np.zeros((n, N_BASE))
    lengths = np.minimum(step_pos + 1, W)
    for length in np.unique(lengths):
        sel = np.flatnonzero(lengths == length)
        seqs = np.stack([tl_preds[p - length + 1:p + 1] for p in step_pos[sel]])
        weights[sel] = model.meta.weights(seqs).values
    mw = MetaWeights(weights)
    return EnsemblePrediction(combine(mw, used), mw, used)
