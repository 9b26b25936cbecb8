"""Gradient-based one-side sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigInvalid, SampleBudgetExceedsData


@dataclass(frozen=True)
class GossConfig:
    top_rate: float = 0.2
    other_rate: float = 0.1
    warmup_iterations: int = 0
    amplification: float = field(init=False)

    def __post_init__(self):
        a, b = self.top_rate, self.other_rate
        if not (0.0 < a < 1.0 and 0.0 < b < 1.0) or a + b > 1.0:
            raise ConfigInvalid(f"GOSS rates need 0 < a, b < 1 and a + b <= 1 (got a={a}, b={b})")
        if self.warmup_iterations < 0:
            raise ConfigInvalid("warmup_iterations must be >= 0")
        object.__setattr__(self, "amplification", (1.0 - a) / b)

    def to_dict(self) -> dict:
        return {"top_rate": self.top_rate, "other_rate": self.other_rate,
                "warmup_iterations": self.warmup_iterations}


def _ceil_count(rate: float, n: int) -> int:
    # guard against 0.2 * 200 landing a hair above 40
    return int(math.ceil(round(rate * n, 9)))


def goss_sample(gradients, config: GossConfig, rng: np.random.Generator):
    """Keep the top ``a`` fraction by |g|, plus a uniform ``b`` fraction of the rest.

    Returns ``(indices, weights)`` with indices ascending. Kept large-gradient
    rows weigh 1; sampled small-gradient rows weigh ``(1 - a) / b``.
    """
    g = np.asarray(gradients, dtype=np.float64)
    n = g.size
    if n * config.top_rate < 1.0:
        raise SampleBudgetExceedsData(f"top_rate={config.top_rate} keeps no rows out of {n}")
    n_top = _ceil_count(config.top_rate, n)
    n_other = _ceil_count(config.other_rate, n)
    if n_top + n_other > n:
        raise SampleBudgetExceedsData(f"GOSS wants {n_top}+{n_other} rows but only {n} exist")
    order = np.argsort(-np.abs(g), kind="stable")
    top = order[:n_top]
    other = rng.choice(order[n_top:], size=n_other, replace=False)
    idx = np.concatenate([top, other])
    w = np.concatenate([np.ones(n_top), np.full(n_other, config.amplification)])
    sort = np.argsort(idx, kind="stable")
    return idx[sort].astype(np.int64), w[sort]
