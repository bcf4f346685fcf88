from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import NetworkParams


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params: NetworkParams) -> "AdamState":
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0)


def adam_step(params: NetworkParams, grads: NetworkParams, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update, applied in place to ``params`` and ``state``."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def step_decay_lr(base_lr: float, epoch: int, decay: float = 0.1, every: int = 10) -> float:
    """Learning rate for a 0-based epoch: multiplied by ``decay`` at epochs 10, 20, ..."""
    return base_lr * decay ** (epoch // every)
