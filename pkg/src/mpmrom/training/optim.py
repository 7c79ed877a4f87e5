"""ADAM with a cosine learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0

    @classmethod
    def for_parameters(cls, params: list) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_update(params: list, grads: list, state: AdamState, lr: float) -> None:
    """One in-place ADAM step over a parameter list."""
    state.step += 1
    b1t = 1.0 - ADAM_BETA1**state.step
    b2t = 1.0 - ADAM_BETA2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / b1t) / (np.sqrt(v / b2t) + ADAM_EPS)


def cosine_lr(step: int, total_steps: int, lr_start: float = 1e-3, lr_end: float = 1e-6) -> float:
    """Learning rate for 0-based step, decaying from lr_start to lr_end."""
    if total_steps <= 1:
        return lr_start
    phase = min(max(step / (total_steps - 1), 0.0), 1.0)
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + np.cos(np.pi * phase))
