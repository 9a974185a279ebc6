"""Hyperbolic layers on the K = -1 hyperboloid.

Differentiable code works on stacked points: a Tensor of shape ``(T, n+1)``
whose rows are hyperboloid coordinates. ``f_x_M`` is the exact numpy form of
the curvature-preserving matrix map and serves as the reference for
``hyper_linear``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_diff as td
from .errors import DegenerateDirectionError, DimensionError, GeometryError, NumericError
from .manifold import DEFAULT_K

MODES = ("dropout", "activation_norm")

# ------------------------------------------------------- differentiable geometry


def _signature(n1):
    s = np.ones(n1)
    s[0] = -1.0
    return s


def lorentz_inner_t(X, Y):
    """Row-wise Lorentz product of two (T, n+1) tensors -> (T,)."""
    return td.tsum(X * Y * _signature(X.shape[-1]), axis=-1)


def lorentz_gram_t(X, Y):
    """All pairwise Lorentz products -> (T, S)."""
    return td.matmul(X * _signature(X.shape[-1]), td.transpose(Y))


def lift_t(E):
    """[cosh r, sinh(r) e / r] row-wise, r = ||e||; the zero row maps to the origin."""
    r = td.norm(E, axis=-1, keepdims=True)
    return td.concat([td.cosh(r), td.sinhc(r) * E], axis=-1)


def squash_t(E, radius):
    """Smoothly shrink rows into the ball of the given radius: R tanh(r/R) e / r."""
    r = td.norm(E, axis=-1, keepdims=True)
    return E * (td.tanh(r / radius) * radius) / td.clamp_min(r, 1e-300) if radius else E


def bounded_lift_t(E, radius):
    """lift_t after squash_t; radius None or 0 means a plain lift."""
    return lift_t(squash_t(E, radius)) if radius else lift_t(E)


def distance_matrix_t(X, Y, K=DEFAULT_K, tol=1e-9):
    """Pairwise arccosh(K <x,y>_L) between the rows of X (T, n+1) and Y (S, n+1).

    Evaluated as 2 asinh(sqrt(q / 2)) with q = -K <x-y, x-y>_L / 2, which equals
    K<x,y>_L - 1 on the hyperboloid but keeps full relative precision when x
    and y nearly coincide; arccosh of the Gram entry loses half the digits there.
    For distant pairs the difference cancels instead, so q = K<x,y>_L - 1 is
    taken from the Gram entry wherever that exceeds 1.
    """
    G = lorentz_gram_t(X, Y) * K
    z = G.data
    # rounding in the Gram entry scales with x0 * y0, not with the entry itself
    mag = np.outer(np.abs(X.data[:, 0]), np.abs(Y.data[:, 0]))
    if np.any(z < 1.0 - tol * np.maximum(1.0, mag)):
        raise GeometryError("K<x,y>_L < 1 in pairwise distance: points off a common sheet")
    n1 = X.shape[-1]
    diff = td.reshape(X, (X.shape[0], 1, n1)) - td.reshape(Y, (1, Y.shape[0], n1))
    q_near = td.tsum(diff * diff * _signature(n1), axis=-1) * (-K / 2.0)
    far = (z - 1.0 > 1.0).astype(np.float64)
    q = q_near * (1.0 - far) + (G - 1.0) * far
    # exact zeros (the diagonal of a self-distance) get a zero subgradient
    s = td.sqrt(td.clamp_min(q * 0.5, 1e-300))
    return td.log(s + td.sqrt(s * s + 1.0)) * 2.0


def log_origin_t(X):
    """Spatial coordinates of log_o(x) for K = -1 points: x_s * d / sinh(d), d = arccosh(x0)."""
    x0 = td.clamp_min(X[:, 0:1], 1.0)
    d = td.arccosh(x0)
    return X[:, 1:] / td.sinhc(d)


def time_from_spatial_t(phi, K=DEFAULT_K):
    """Complete spatial coordinates phi to hyperboloid points [sqrt(|phi|^2 - 1/K), phi]."""
    t = td.sqrt(td.tsum(phi * phi, axis=-1, keepdims=True) - 1.0 / K)
    return td.concat([t, phi], axis=-1)


# ------------------------------------------------------------------ the layers


def f_x_M(M, x, K=DEFAULT_K):
    """Apply the adapted matrix f_x(M) to x.

    The first row of M (v) is rescaled by sqrt(||Wx||^2 - 1/K) / (v.x); the
    product with x is therefore [sqrt(||Wx||^2 - 1/K), Wx] whatever v is, as
    long as v.x != 0.
    """
    M = np.asarray(M, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if M.ndim != 2 or M.shape[1] != x.shape[0]:
        raise DimensionError(f"M has shape {M.shape}, x has length {x.shape[0]}")
    v, W = M[0], M[1:]
    vx = float(v @ x)
    if vx == 0.0:
        raise DegenerateDirectionError("v^T x = 0: the adapted first row is undefined")
    Wx = W @ x
    top_row = np.sqrt(Wx @ Wx - 1.0 / K) / vx * v
    return np.concatenate([[top_row @ x], Wx])


@dataclass
class HyperLinearParams:
    W: td.Tensor  # (m, n+1)
    v: td.Tensor  # (n+1,)
    b: td.Tensor  # (m,)
    b_prime: td.Tensor  # scalar
    scale: float = 1.0
    mode: str = "activation_norm"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.v.shape[0] != self.W.shape[1] or self.b.shape[0] != self.W.shape[0]:
            raise DimensionError(f"inconsistent shapes W{self.W.shape} v{self.v.shape} b{self.b.shape}")
        if not (np.all(np.isfinite(self.W.data)) and np.all(np.isfinite(self.v.data))):
            raise NumericError("non-finite hyper-linear weights")

    @property
    def in_dim(self):
        return self.W.shape[1] - 1

    @property
    def out_dim(self):
        return self.W.shape[0]

    @classmethod
    def init(cls, n, m, rng, mode="activation_norm", scale=1.0, prefix=""):
        bound = 1.0 / np.sqrt(n + 1)
        return cls(
            W=td.parameter(rng.uniform(-bound, bound, size=(m, n + 1)), name=prefix + "W"),
            v=td.parameter(rng.uniform(-bound, bound, size=n + 1), name=prefix + "v"),
            b=td.parameter(np.zeros(m), name=prefix + "b"),
            b_prime=td.parameter(np.zeros(()), name=prefix + "b_prime"),
            scale=scale,
            mode=mode,
        )

    def tensors(self):
        return {"W": self.W, "v": self.v, "b": self.b, "b_prime": self.b_prime}


def hyper_linear(X, p, training=False, rng=None, dropout_rate=0.0, K=DEFAULT_K):
    """Hyperbolic linear layer on stacked points X of shape (T, n+1) -> (T, m+1).

    ``dropout`` mode: phi = W dropout(x).
    ``activation_norm`` mode: phi = scale * sigmoid(v.x + b') * u / ||u||,
    u = W relu(x) + b.
    The output is completed with the time coordinate sqrt(||phi||^2 - 1/K).
    """
    X = td.as_tensor(X)
    single = X.ndim == 1
    if single:
        X = td.reshape(X, (1, -1))
    if X.shape[-1] != p.W.shape[1]:
        raise DimensionError(f"input has {X.shape[-1]} coordinates, layer expects {p.W.shape[1]}")
    if p.mode == "dropout":
        Xd = td.dropout(X, dropout_rate, rng, training) if rng is not None else X
        phi = td.matmul(Xd, td.transpose(p.W))
    else:
        u = td.matmul(td.relu(X), td.transpose(p.W)) + p.b
        un = td.clamp_min(td.norm(u, axis=-1, keepdims=True), 1e-300)
        gate = td.sigmoid(td.matmul(X, p.v) + p.b_prime)
        phi = u * (td.reshape(gate, (-1, 1)) * p.scale) / un
    if not np.all(np.isfinite(phi.data)):
        raise NumericError("hyper_linear produced non-finite values")
    out = time_from_spatial_t(phi, K)
    return td.reshape(out, (-1,)) if single else out


@dataclass
class HyperClassifierParams:
    W: td.Tensor  # (n+1,)
    b: td.Tensor  # scalar
    eps: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @classmethod
    def init(cls, n, rng, eps=1.0, prefix=""):
        w = rng.normal(0.0, 0.1 / np.sqrt(n + 1), size=n + 1)
        return cls(
            W=td.parameter(w, name=prefix + "W"),
            # start near sigma(<F,W>) rather than sigma(eps + ...)
            b=td.parameter(np.array(-eps), name=prefix + "b"),
            eps=eps,
        )

    def tensors(self):
        return {"W": self.W, "b": self.b}


def hyper_classifier(F, p):
    """Snippet scores sigmoid(eps + eps <F, W>_L + b) for stacked points F (T, n+1)."""
    F = td.as_tensor(F)
    if F.shape[-1] != p.W.shape[0]:
        raise DimensionError(f"points have {F.shape[-1]} coordinates, classifier expects {p.W.shape[0]}")
    W = td.reshape(p.W, (1, -1))
    ip = lorentz_inner_t(F if F.ndim == 2 else td.reshape(F, (1, -1)), W)
    out = td.sigmoid(ip * p.eps + p.eps + p.b)
    return out if F.ndim == 2 else td.reshape(out, ())
