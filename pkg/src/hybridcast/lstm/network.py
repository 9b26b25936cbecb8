"""LSTM forward pass and backpropagation through time, in float64 numpy.

Gate equations per layer (sigmoid gates, tanh candidate and output)::

    f_t = sig(W_f x_t + U_f h_{t-1} + b_f)
    i_t = sig(W_i x_t + U_i h_{t-1} + b_i)
    g_t = tanh(W_c x_t + U_c h_{t-1} + b_c)
    C_t = f_t * C_{t-1} + i_t * g_t
    o_t = sig(W_o x_t + U_o h_{t-1} + b_o)
    h_t = o_t * tanh(C_t)

A linear head maps the top layer's h_t to the outputs. All contractions go
through ``einsum`` rather than BLAS so a row's result does not depend on
which other rows share its batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CacheMismatch, DimensionMismatch

GATES = ("f", "i", "c", "o")


def sigmoid(z):
    # exp(-|z|) never overflows; pick the matching form per sign
    e = np.exp(-np.abs(z))
    d = 1.0 + e
    return np.where(z >= 0, 1.0 / d, e / d)


def _rows_by(a, w):
    """a[..., d] @ w[k, d].T without BLAS."""
    return np.einsum("...d,kd->...k", a, w)


@dataclass
class LstmParams:
    """``layers[l]`` maps ``W_f, U_f, b_f, ...`` to arrays; ``V``/``b_out`` form the head."""

    layers: list[dict[str, np.ndarray]]
    V: np.ndarray
    b_out: np.ndarray

    @property
    def hidden_size(self) -> int:
        return int(self.V.shape[1])

    @property
    def input_size(self) -> int:
        return int(self.layers[0]["W_f"].shape[1])

    @property
    def output_size(self) -> int:
        return int(self.V.shape[0])

    def named_arrays(self):
        for l, layer in enumerate(self.layers):
            for name in ("W", "U", "b"):
                for g in GATES:
                    key = f"{name}_{g}"
                    yield f"layer{l}.{key}", layer[key]
        yield "V", self.V
        yield "b_out", self.b_out

    def arrays(self) -> list[np.ndarray]:
        return [a for _, a in self.named_arrays()]

    def copy(self) -> "LstmParams":
        return LstmParams([{k: v.copy() for k, v in layer.items()} for layer in self.layers],
                          self.V.copy(), self.b_out.copy())

    def zeros_like(self) -> "LstmParams":
        return LstmParams([{k: np.zeros_like(v) for k, v in layer.items()} for layer in self.layers],
                          np.zeros_like(self.V), np.zeros_like(self.b_out))

    def stacked(self, l: int):
        layer = self.layers[l]
        W = np.concatenate([layer[f"W_{g}"] for g in GATES])
        U = np.concatenate([layer[f"U_{g}"] for g in GATES])
        b = np.concatenate([layer[f"b_{g}"] for g in GATES])
        return W, U, b

    def to_dict(self) -> dict:
        return {name: {"shape": list(a.shape), "data": a.ravel().tolist()}
                for name, a in self.named_arrays()}

    @classmethod
    def from_dict(cls, doc: dict, n_layers: int) -> "LstmParams":
        def arr(name):
            entry = doc[name]
            return np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])

        layers = []
        for l in range(n_layers):
            layers.append({f"{n}_{g}": arr(f"layer{l}.{n}_{g}") for n in ("W", "U", "b") for g in GATES})
        return cls(layers, arr("V"), arr("b_out"))


def init_params(input_size: int, hidden_size: int, output_size: int, n_layers: int,
                rng: np.random.Generator, forget_bias: float = 1.0,
                zero_head: bool = False) -> LstmParams:
    """Glorot-uniform weights, zero biases except the forget gate."""
    layers = []
    for l in range(n_layers):
        d_in = input_size if l == 0 else hidden_size
        lim_w = np.sqrt(6.0 / (d_in + hidden_size))
        lim_u = np.sqrt(6.0 / (2 * hidden_size))
        layer = {}
        for g in GATES:
            layer[f"W_{g}"] = rng.uniform(-lim_w, lim_w, (hidden_size, d_in))
            layer[f"U_{g}"] = rng.uniform(-lim_u, lim_u, (hidden_size, hidden_size))
            layer[f"b_{g}"] = np.full(hidden_size, forget_bias if g == "f" else 0.0)
        layers.append(layer)
    if zero_head:
        V = np.zeros((output_size, hidden_size))
    else:
        lim = np.sqrt(6.0 / (hidden_size + output_size))
        V = rng.uniform(-lim, lim, (output_size, hidden_size))
    return LstmParams(layers, V, np.zeros(output_size))


@dataclass
class LstmState:
    h: np.ndarray
    C: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int, batch: tuple = ()) -> "LstmState":
        shape = tuple(batch) + (hidden_size,)
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass
class CellCache:
    x: np.ndarray
    h_prev: np.ndarray
    C_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray
    C: np.ndarray
    o: np.ndarray
    h: np.ndarray


def lstm_cell_forward(params: LstmParams, x_t, state: LstmState, layer: int = 0):
    """One step of one layer. Returns the new state and the step's cache."""
    W, U, b = params.stacked(layer)
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != W.shape[1] or state.h.shape[-1] != U.shape[1]:
        raise DimensionMismatch(
            f"cell expects input {W.shape[1]} / hidden {U.shape[1]}, got "
            f"{x_t.shape[-1]} / {state.h.shape[-1]}")
    H = U.shape[1]
    z = _rows_by(x_t, W) + _rows_by(state.h, U) + b
    f = sigmoid(z[..., :H])
    i = sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = sigmoid(z[..., 3 * H:])
    C = f * state.C + i * g
    h = o * np.tanh(C)
    return LstmState(h, C), CellCache(x_t, state.h, state.C, f, i, g, C, o, h)


@dataclass
class ForwardCache:
    """Per-layer stacks over time, each shaped [B, T, ...]."""

    x: list[np.ndarray] = field(default_factory=list)
    f: list[np.ndarray] = field(default_factory=list)
    i: list[np.ndarray] = field(default_factory=list)
    g: list[np.ndarray] = field(default_factory=list)
    o: list[np.ndarray] = field(default_factory=list)
    C: list[np.ndarray] = field(default_factory=list)
    tanhC: list[np.ndarray] = field(default_factory=list)
    h: list[np.ndarray] = field(default_factory=list)
    squeeze: bool = False

    @property
    def seq_len(self) -> int:
        return int(self.x[0].shape[1])

    @property
    def batch(self) -> int:
        return int(self.x[0].shape[0])


def _layer_forward(params: LstmParams, l: int, X: np.ndarray, cache: ForwardCache) -> np.ndarray:
    W, U, b = params.stacked(l)
    B, T, _ = X.shape
    H = U.shape[1]
    zx = _rows_by(X, W) + b
    f = np.empty((B, T, H)); i = np.empty_like(f); g = np.empty_like(f); o = np.empty_like(f)
    C = np.empty_like(f); tC = np.empty_like(f); h = np.empty_like(f)
    h_prev = np.zeros((B, H))
    C_prev = np.zeros((B, H))
    for t in range(T):
        z = zx[:, t] + _rows_by(h_prev, U)
        f[:, t] = sigmoid(z[:, :H])
        i[:, t] = sigmoid(z[:, H:2 * H])
        g[:, t] = np.tanh(z[:, 2 * H:3 * H])
        o[:, t] = sigmoid(z[:, 3 * H:])
        C[:, t] = f[:, t] * C_prev + i[:, t] * g[:, t]
        tC[:, t] = np.tanh(C[:, t])
        h[:, t] = o[:, t] * tC[:, t]
        h_prev, C_prev = h[:, t], C[:, t]
    for name, arr in (("x", X), ("f", f), ("i", i), ("g", g), ("o", o), ("C", C),
                      ("tanhC", tC), ("h", h)):
        getattr(cache, name).append(arr)
    return h


def lstm_forward(params: LstmParams, sequence, all_steps: bool = False):
    """Run the stack over ``sequence`` ([T, D] or [B, T, D]) from a zero state.

    Returns ``(outputs, cache)``: outputs are [B, T, out] with ``all_steps``,
    else the final step [B, out] (batch axis dropped for 2-D input).
    """
    X = np.asarray(sequence, dtype=np.float64)
    squeeze = X.ndim == 2
    if squeeze:
        X = X[None]
    if X.ndim != 3 or X.shape[1] < 1:
        raise DimensionMismatch("sequence must be [T, D] or [B, T, D] with T >= 1")
    if X.shape[2] != params.input_size:
        raise DimensionMismatch(f"expected input size {params.input_size}, got {X.shape[2]}")
    cache = ForwardCache(squeeze=squeeze)
    h = X
    for l in range(len(params.layers)):
        h = _layer_forward(params, l, h, cache)
    Y = _rows_by(h, params.V) + params.b_out
    out = Y if all_steps else Y[:, -1]
    return (out[0] if squeeze else out), cache


def lstm_backward(params: LstmParams, cache: ForwardCache, grad_outputs) -> LstmParams:
    """Exact gradients of a loss with respect to every parameter.

    ``grad_outputs`` is dLoss/dOutputs, shaped like the forward outputs
    (final step only or all steps).
    """
    if len(cache.x) != len(params.layers):
        raise CacheMismatch("cache layer count differs from params")
    B, T = cache.batch, cache.seq_len
    out_dim = params.output_size
    dY = np.asarray(grad_outputs, dtype=np.float64)
    if cache.squeeze:
        dY = dY[None]
    if dY.shape == (B, out_dim):
        full = np.zeros((B, T, out_dim))
        full[:, -1] = dY
        dY = full
    if dY.shape != (B, T, out_dim):
        raise CacheMismatch(f"gradient shape {dY.shape} does not match forward outputs")

    grads = params.zeros_like()
    h_top = cache.h[-1]
    grads.V = np.einsum("bto,bth->oh", dY, h_top)
    grads.b_out = dY.sum(axis=(0, 1))
    dh_seq = _rows_by(dY, params.V.T)

    for l in reversed(range(len(params.layers))):
        W, U, _ = params.stacked(l)
        H = U.shape[1]
        f, i, g, o = cache.f[l], cache.i[l], cache.g[l], cache.o[l]
        C, tC, h, X = cache.C[l], cache.tanhC[l], cache.h[l], cache.x[l]
        dz = np.empty((B, T, 4 * H))
        dh_next = np.zeros((B, H))
        dC_next = np.zeros((B, H))
        for t in reversed(range(T)):
            C_prev = C[:, t - 1] if t > 0 else np.zeros((B, H))
            dh = dh_seq[:, t] + dh_next
            do = dh * tC[:, t]
            dC = dh * o[:, t] * (1.0 - tC[:, t] ** 2) + dC_next
            df = dC * C_prev
            di = dC * g[:, t]
            dg = dC * i[:, t]
            dC_next = dC * f[:, t]
            dz[:, t, :H] = df * f[:, t] * (1.0 - f[:, t])
            dz[:, t, H:2 * H] = di * i[:, t] * (1.0 - i[:, t])
            dz[:, t, 2 * H:3 * H] = dg * (1.0 - g[:, t] ** 2)
            dz[:, t, 3 * H:] = do * o[:, t] * (1.0 - o[:, t])
            dh_next = _rows_by(dz[:, t], U.T)
        h_prev = np.concatenate([np.zeros((B, 1, H)), h[:, :-1]], axis=1)
        dW = np.einsum("btk,btd->kd", dz, X)
        dU = np.einsum("btk,bth->kh", dz, h_prev)
        db = dz.sum(axis=(0, 1))
        layer = grads.layers[l]
        for k, gname in enumerate(GATES):
            sl = slice(k * H, (k + 1) * H)
            layer[f"W_{gname}"] = dW[sl]
            layer[f"U_{gname}"] = dU[sl]
            layer[f"b_{gname}"] = db[sl]
        if l > 0:
            dh_seq = _rows_by(dz, W.T)
    return grads
