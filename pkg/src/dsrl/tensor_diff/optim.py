"""Adam with a per-epoch cosine-annealed learning rate, no weight decay."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError


def cosine_lr(epoch, total_epochs, base_lr=1e-3):
    """base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs)); zero at the endpoint."""
    if total_epochs <= 0:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))


@dataclass
class OptimizerState:
    total_epochs: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state, epoch):
    """Update ``params`` (name -> Tensor) in place from ``grads`` (name -> array).

    Parameters missing from ``grads`` are treated as having zero gradient, so
    their moments still decay. Returns ``params``.
    """
    state.step += 1
    lr = cosine_lr(epoch, state.total_epochs, state.lr)
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, parameter {p.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * g * g
        state.m[name] = m
        state.v[name] = v
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
