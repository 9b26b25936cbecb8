"""Adam with global-norm gradient clipping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import LstmParams

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params: LstmParams) -> "AdamState":
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0)


def global_norm(arrays) -> float:
    return float(np.sqrt(sum(float(np.sum(a * a)) for a in arrays)))


def clip_by_global_norm(arrays, max_norm: float | None):
    """Scale every array by ``max_norm / norm`` when the joint L2 norm exceeds it."""
    if max_norm is None or max_norm <= 0:
        return list(arrays), 1.0
    norm = global_norm(arrays)
    if norm <= max_norm:
        return list(arrays), 1.0
    scale = max_norm / norm
    return [a * scale for a in arrays], scale


def adam_step(params: LstmParams, grads: LstmParams, state: AdamState, learning_rate: float,
              clip_norm: float | None = None) -> tuple[LstmParams, AdamState]:
    """One bias-corrected Adam update, applied in place to ``params``."""
    g_list, _ = clip_by_global_norm(grads.arrays(), clip_norm)
    state.t += 1
    c1 = 1.0 - BETA1 ** state.t
    c2 = 1.0 - BETA2 ** state.t
    for p, g, m, v in zip(params.arrays(), g_list, state.m, state.v):
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * (g * g)
        p -= learning_rate * (m / c1) / (np.sqrt(v / c2) + EPS)
    return params, state
