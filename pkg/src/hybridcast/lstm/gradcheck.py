"""Central finite differences against the analytic BPTT gradients."""
from __future__ import annotations

import numpy as np

from .network import LstmParams, lstm_backward, lstm_forward


def squared_loss(params: LstmParams, sequence, target, all_steps: bool = False):
    """0.5 * mean squared error and its gradient with respect to the outputs."""
    out, cache = lstm_forward(params, sequence, all_steps=all_steps)
    diff = out - np.asarray(target, dtype=np.float64)
    loss = 0.5 * float(np.mean(diff * diff))
    return loss, diff / diff.size, cache


def finite_diff_gradcheck(params: LstmParams, sequence, target, eps: float = 1e-5,
                          all_steps: bool = False, analytic: LstmParams | None = None) -> float:
    """Max over entries of ``|analytic - numeric| / (|analytic| + 1e-8)``.

    ``numeric`` is the central difference of the 0.5 * mean squared loss.

    ``analytic`` overrides the backward pass (used to check the check).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if analytic is None:
        _, dout, cache = squared_loss(params, sequence, target, all_steps)
        analytic = lstm_backward(params, cache, dout)
    target = np.asarray(target, dtype=np.float64)
    probe = params.copy()
    worst = 0.0
    for p, a in zip(probe.arrays(), analytic.arrays()):
        flat = p.reshape(-1)
        a_flat = a.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up, _ = lstm_forward(probe, sequence, all_steps=all_steps)
            flat[k] = orig - eps
            down, _ = lstm_forward(probe, sequence, all_steps=all_steps)
            flat[k] = orig
            # L(+) - L(-) factored as a difference of squares, so the two
            # nearly equal losses are never subtracted directly
            delta = 0.5 * np.mean((up - down) * (up + down - 2.0 * target))
            numeric = float(delta) / (2.0 * eps)
            worst = max(worst, abs(a_flat[k] - numeric) / (abs(a_flat[k]) + 1e-8))
    return worst
