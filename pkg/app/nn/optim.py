# FILE: app/nn/optim.py
# ============================================================================
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from app.exceptions import InvalidArgumentError


@dataclass
class AdamState:
    """Moment accumulators keyed by parameter name."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
) -> None:
    """One bias-corrected Adam update; parameters change in place."""
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, value in params.items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise InvalidArgumentError(f"gradient for {name} has shape {grad.shape}, expected {value.shape}")
        m = state.m.setdefault(name, np.zeros_like(value))
        v = state.v.setdefault(name, np.zeros_like(value))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad ** 2
        value -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
