from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidInputError, UsageError
from .layers import ParameterStore


def adam_step(store: ParameterStore, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, weight_decay: float = 0.0) -> None:
    """One bias-corrected Adam update with decoupled weight decay.

    Decay is applied first as ``theta <- theta * (1 - lr * weight_decay)``.
    """
    params = store.parameters()
    if not params or any(p.grad is None for p in params):
        raise UsageError("adam_step called before gradients were populated")
    store.step_count += 1
    t = store.step_count
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in zip(store.names(), params):
        g = p.grad
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        data = p.data
        if weight_decay:
            data = data * (1.0 - lr * weight_decay)
        p.data = data - lr * (m / c1) / (np.sqrt(v / c2) + eps)


def cosine_lr(step: int, total_steps: int, eta_max: float, eta_min: float = 0.0) -> float:
    if total_steps <= 0 or not 0 <= step <= total_steps:
        raise InvalidInputError(f"step {step} outside [0, {total_steps}]")
    return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + math.cos(math.pi * step / total_steps))
