"""Central finite-difference verification of recorded gradients."""

import numpy as np

from .tensor import Tensor, backward, no_grad


def numeric_grad(f, arrays, h=1e-5):
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            with no_grad():
                fp = f(*[Tensor(b) for b in arrays]).item()
            flat[i] = orig - h
            with no_grad():
                fm = f(*[Tensor(b) for b in arrays]).item()
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out


def analytic_grad(f, arrays):
    leaves = [Tensor(np.array(a, dtype=np.float64), requires_grad=True) for a in arrays]
    loss = f(*leaves)
    backward(loss)
    return [lf.grad if lf.grad is not None else np.zeros_like(lf.data) for lf in leaves]


def grad_check(f, inputs, h=1e-5):
    """Worst relative error between recorded and finite-difference gradients.

    ``f`` maps Tensors to a scalar Tensor. The per-coordinate error is
    |a - n| / max(|a|, |n|, 1e-8).
    """
    a = analytic_grad(f, inputs)
    n = numeric_grad(f, inputs, h)
    worst = 0.0
    for ga, gn in zip(a, n):
        if ga.size == 0:
            continue
        rel = np.abs(ga - gn) / np.maximum(np.maximum(np.abs(ga), np.abs(gn)), 1e-8)
        worst = max(worst, float(rel.max()))
    return worst
