"""Dense tensors that record their construction for reverse-mode gradients.

Every op result keeps references to its inputs and a closure computing the
vector-Jacobian product. Nodes are numbered in creation order (the tape
position), so reverse creation order is a valid topological order for the
backward sweep. Recording is thread-local and can be switched off with
``no_grad()``.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager

import numpy as np

from ..errors import ContractError, DimensionError, DomainError

_tape_counter = itertools.count()
_state = threading.local()

ARCCOSH_CLAMP = 1.0 + 1e-12
ARCCOSH_DOMAIN_TOL = 1e-9


def grad_enabled():
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "tape_id", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None
        self.tape_id = next(_tape_counter)
        self.name = name

    # -- basic protocol
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- operators
    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name=None):
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def _record(out_data, parents, vjp):
    out = Tensor(out_data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _broadcast_shape(a, b, opname):
    if a.shape == b.shape:
        return a.shape
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{opname}: cannot broadcast {a.shape} with {b.shape}") from None


# ---------------------------------------------------------------- elementwise


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _record(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return _record(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return _record(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        ),
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    out = a.data / b.data
    return _record(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None,
        ),
    )


def neg(a):
    a = as_tensor(a)
    return _record(-a.data, (a,), lambda g: (-g,))


def power(a, p):
    a = as_tensor(a)
    p = float(p)
    return _record(a.data**p, (a,), lambda g: (g * p * a.data ** (p - 1),))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log of non-positive value")
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a):
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise DomainError("sqrt of negative value")
    out = np.sqrt(a.data)
    return _record(out, (a,), lambda g: (np.where(out > 0, g / (2.0 * np.where(out > 0, out, 1.0)), 0.0),))


def sigmoid(a):
    a = as_tensor(a)
    out = _np_sigmoid(a.data)
    return _record(out, (a,), lambda g: (g * out * (1.0 - out),))


def _np_sigmoid(x):
    # split by sign so neither branch overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return _record(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _record(out, (a,), lambda g: (g * (1.0 - out * out),))


def cosh(a):
    a = as_tensor(a)
    return _record(np.cosh(a.data), (a,), lambda g: (g * np.sinh(a.data),))


def sinh(a):
    a = as_tensor(a)
    return _record(np.sinh(a.data), (a,), lambda g: (g * np.cosh(a.data),))


def sinhc(a):
    """sinh(x)/x with the removable singularity at 0 filled in (value 1, slope 0)."""
    a = as_tensor(a)
    x = a.data
    small = np.abs(x) < 1e-2
    xs = np.where(small, 1.0, x)
    x2 = x * x
    # series below 1e-2 avoids cancellation in the slope formula
    out = np.where(small, 1.0 + x2 / 6.0 + x2 * x2 / 120.0 + x2**3 / 5040.0, np.sinh(xs) / xs)
    d = np.where(
        small,
        x / 3.0 + x * x2 / 30.0 + x * x2 * x2 / 840.0,
        (xs * np.cosh(xs) - np.sinh(xs)) / (xs * xs),
    )
    return _record(out, (a,), lambda g: (g * d,))


def arccosh(a):
    """arccosh with a soft clamp: inputs within roundoff of 1 evaluate to 0 with zero slope."""
    a = as_tensor(a)
    x = a.data
    if np.any(x < 1.0 - ARCCOSH_DOMAIN_TOL):
        raise DomainError(f"arccosh input {np.min(x):.6g} < 1")
    live = x > ARCCOSH_CLAMP
    xs = np.where(live, x, ARCCOSH_CLAMP)
    out = np.where(live, np.arccosh(xs), np.arccosh(np.maximum(x, 1.0)))
    return _record(out, (a,), lambda g: (np.where(live, g / np.sqrt(xs * xs - 1.0), 0.0),))


def absolute(a):
    a = as_tensor(a)
    return _record(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def clamp_min(a, lo):
    a = as_tensor(a)
    mask = a.data >= lo
    return _record(np.where(mask, a.data, lo), (a,), lambda g: (g * mask,))


def dropout(a, rate, rng, training=True):
    """Inverted dropout; identity when rate == 0 or not training."""
    a = as_tensor(a)
    if not training or rate == 0:
        return a
    if not 0 <= rate < 1:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _record(a.data * keep, (a,), lambda g: (g * keep,))


# ---------------------------------------------------------------- linear algebra


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
            return _record(a.data @ b.data, (a, b), lambda g: (np.outer(g, b.data), a.data.T @ g))
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    return _record(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T if a.requires_grad else None, a.data.T @ g if b.requires_grad else None),
    )


def transpose(a):
    a = as_tensor(a)
    return _record(a.data.T, (a,), lambda g: (g.T,))


def reshape(a, shape):
    a = as_tensor(a)
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def getitem(a, idx):
    a = as_tensor(a)

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _record(a.data[idx], (a,), vjp)


def concat(tensors, axis=0):
    ts = [as_tensor(t) for t in tensors]
    ax = axis if axis >= 0 else ts[0].ndim + axis
    for t in ts[1:]:
        if t.ndim != ts[0].ndim or any(
            t.shape[i] != ts[0].shape[i] for i in range(t.ndim) if i != ax
        ):
            raise DimensionError(f"concat shape mismatch: {[t.shape for t in ts]} on axis {axis}")
    sizes = [t.shape[ax] for t in ts]
    cuts = np.cumsum(sizes)[:-1]
    return _record(
        np.concatenate([t.data for t in ts], axis=ax),
        tuple(ts),
        lambda g: tuple(np.split(g, cuts, axis=ax)),
    )


# ---------------------------------------------------------------- reductions


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(out, (a,), vjp)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) / float(n)


def norm(a, axis=-1, keepdims=False):
    """Euclidean norm with zero subgradient at the zero vector."""
    a = as_tensor(a)
    r = np.sqrt(np.sum(a.data * a.data, axis=axis, keepdims=True))
    safe = np.where(r > 0, r, 1.0)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.where(r > 0, g * a.data / safe, 0.0),)

    return _record(r if keepdims else np.squeeze(r, axis=axis), (a,), vjp)


def softmax(a, axis=-1):
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    return _record(s, (a,), lambda g: (s * (g - np.sum(g * s, axis=axis, keepdims=True)),))


def max_pool1d(a, window, stride, axis=-1):
    """Max pooling over non-overlapping or strided windows along ``axis``.

    Ties route the gradient to the first maximal element of the window.
    """
    a = as_tensor(a)
    ax = axis if axis >= 0 else a.ndim + axis
    x = np.moveaxis(a.data, ax, -1)
    n = x.shape[-1]
    if n < window:
        raise DimensionError(f"max_pool1d: axis length {n} < window {window}")
    starts = np.arange(0, n - window + 1, stride)
    gather = starts[:, None] + np.arange(window)[None, :]
    windows = x[..., gather]
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    src = np.take_along_axis(np.broadcast_to(gather, windows.shape), arg[..., None], axis=-1)[..., 0]

    def vjp(g):
        gm = np.moveaxis(g, ax, -1)
        gx = np.zeros_like(x)
        if stride >= window:
            np.put_along_axis(gx, src, gm, axis=-1)
        else:
            # overlapping windows: accumulate row by row
            fg, fs, fx = gm.reshape(-1, gm.shape[-1]), src.reshape(-1, src.shape[-1]), gx.reshape(-1, n)
            for r in range(fg.shape[0]):
                np.add.at(fx[r], fs[r], fg[r])
        return (np.moveaxis(gx, -1, ax),)

    return _record(np.moveaxis(out, -1, ax), (a,), vjp)


# ---------------------------------------------------------------- backward


def backward(loss):
    """Reverse sweep from a scalar ``loss``.

    Returns a dict mapping every ``requires_grad`` leaf reached to its
    gradient; the same arrays are also stored on ``leaf.grad``.
    """
    if not isinstance(loss, Tensor) or loss.size != 1:
        raise ContractError("backward needs a scalar Tensor loss")
    if not loss.requires_grad:
        return {}
    nodes = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if t.tape_id in nodes:
            continue
        nodes[t.tape_id] = t
        for p in t._parents:
            if p.requires_grad and p.tape_id not in nodes:
                stack.append(p)
    grads = {loss.tape_id: np.ones_like(loss.data)}
    leaves = {}
    for tid in sorted(nodes, reverse=True):
        t = nodes[tid]
        g = grads.pop(tid, None)
        if g is None:
            continue
        if t._vjp is None:
            leaves[t] = g
            t.grad = g
            continue
        for p, gp in zip(t._parents, t._vjp(g)):
            if gp is None or not p.requires_grad:
                continue
            if p.tape_id in grads:
                grads[p.tape_id] = grads[p.tape_id] + gp
            else:
                grads[p.tape_id] = gp
    return leaves
