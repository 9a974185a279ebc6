"""Exact Lorentz-model (hyperboloid) geometry in float64 numpy.

Points are arrays of length n+1 with the time coordinate first, or stacks of
them with shape ``(..., n+1)``. Every function here is pure; the differentiable
counterparts used for training live in ``dsrl.hypernn`` and ``dsrl.graphs`` and
are checked against these.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, GeometryError

DEFAULT_K = -1.0
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class ManifoldConfig:
    K: float = DEFAULT_K
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not self.K < 0:
            raise GeometryError(f"curvature must be negative, got {self.K}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


def _config(cfg):
    return ManifoldConfig() if cfg is None else cfg


def _as_array(x):
    if isinstance(x, (LorentzPoint, TangentVector)):
        return x.coords
    return np.asarray(x, dtype=np.float64)


def lorentz_inner(x, y):
    """Minkowski product -x0*y0 + sum_i xi*yi over the last axis."""
    x = _as_array(x)
    y = _as_array(y)
    if x.shape[-1] != y.shape[-1]:
        raise DimensionError(f"length mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    if x.shape[-1] < 2:
        raise DimensionError("Lorentz vectors need at least 2 coordinates")
    return np.sum(x[..., 1:] * y[..., 1:], axis=-1) - x[..., 0] * y[..., 0]


def lorentz_norm(v):
    """sqrt(<v,v>_L) for spacelike v, clamped at zero against roundoff."""
    return np.sqrt(np.maximum(lorentz_inner(v, v), 0.0))


def origin(n, cfg=None):
    cfg = _config(cfg)
    o = np.zeros(n + 1)
    o[0] = np.sqrt(-1.0 / cfg.K)
    return o


def is_on_manifold(x, cfg=None):
    cfg = _config(cfg)
    x = _as_array(x)
    if x.ndim != 1 or x.shape[0] < 2 or not np.all(np.isfinite(x)):
        return False
    return bool(abs(lorentz_inner(x, x) - 1.0 / cfg.K) <= cfg.tol and x[0] > 0)


def manifold_residual(X, cfg=None):
    """Worst |<x,x>_L - 1/K| over the rows of X (inf if any row has x0 <= 0)."""
    cfg = _config(cfg)
    X = np.atleast_2d(_as_array(X))
    if X.shape[0] == 0:
        return 0.0
    return float(np.max(kernels.membership_residual(np.ascontiguousarray(X), cfg.K)))


def _resolve_time(x, K):
    """Recompute x0 from the spatial part so <x,x>_L = 1/K to roundoff."""
    out = np.array(x, dtype=np.float64, copy=True)
    out[..., 0] = np.sqrt(np.sum(out[..., 1:] ** 2, axis=-1) - 1.0 / K)
    return out


def project_to_tangent(x, u, cfg=None):
    """Remove the component of u along x so the result is tangent at x."""
    x = _as_array(x)
    u = _as_array(u)
    coef = lorentz_inner(x, u) / lorentz_inner(x, x)
    return u - np.expand_dims(coef, -1) * x


def _check_tangent(x, v, cfg):
    ip = lorentz_inner(x, v)
    scale = 1.0 + np.linalg.norm(x, axis=-1) * np.linalg.norm(v, axis=-1)
    if np.any(np.abs(ip) > cfg.tol * scale):
        raise GeometryError(f"vector is not tangent at base point (<x,v>_L = {np.max(np.abs(ip)):.3e})")


def exp_map(x, v, cfg=None):
    cfg = _config(cfg)
    x = _as_array(x)
    v = _as_array(v)
    _check_tangent(x, v, cfg)
    sk = np.sqrt(-cfg.K)
    t = sk * lorentz_norm(v)
    t_ = np.expand_dims(t, -1)
    zero = t_ == 0
    safe = np.where(zero, 1.0, t_)
    y = np.cosh(t_) * x + np.sinh(t_) * v / safe
    y = _resolve_time(y, cfg.K)
    return np.where(zero, x, y)


def geodesic_distance(x, y, cfg=None):
    """arccosh(K <x,y>_L), with the argument clamped to [1, inf) for roundoff."""
    cfg = _config(cfg)
    z = cfg.K * lorentz_inner(x, y)
    if np.any(z < 1.0 - cfg.tol * np.maximum(1.0, np.abs(z))):
        raise GeometryError(f"K<x,y>_L = {np.min(z):.6g} < 1: points not on a common sheet")
    d = np.arccosh(np.maximum(z, 1.0))
    return float(d) if np.ndim(d) == 0 else d


def log_map(x, y, cfg=None):
    """Tangent vector at x pointing to y with Lorentz norm equal to the geodesic length.

    Uses u = y - K<x,y>_L x as the direction and divides the distance by
    sqrt(-K) so that exp_map(x, log_map(x, y)) == y for every curvature
    (the two readings coincide at K = -1).
    """
    cfg = _config(cfg)
    x = _as_array(x)
    y = _as_array(y)
    d = np.asarray(geodesic_distance(x, y, cfg))
    u = y - np.expand_dims(cfg.K * lorentz_inner(x, y), -1) * x
    un = np.expand_dims(lorentz_norm(u), -1)
    d_ = np.expand_dims(d, -1) / np.sqrt(-cfg.K)
    zero = (un == 0) | (d_ == 0)
    v = np.where(zero, 0.0, d_ * u / np.where(zero, 1.0, un))
    return project_to_tangent(x, v)


def lift_from_euclidean(e):
    """Map Euclidean features onto the K = -1 hyperboloid through exp at the origin."""
    e = np.asarray(e, dtype=np.float64)
    r = np.linalg.norm(e, axis=-1, keepdims=True)
    zero = r == 0
    safe = np.where(zero, 1.0, r)
    spatial = np.where(zero, 0.0, np.sinh(r) * e / safe)
    return np.concatenate([np.cosh(r), spatial], axis=-1)


def log_at_origin(x, cfg=None):
    """Spatial coordinates of log_o(x); the time component is identically zero."""
    cfg = _config(cfg)
    x = _as_array(x)
    o = origin(x.shape[-1] - 1, cfg)
    return log_map(np.broadcast_to(o, x.shape), x, cfg)[..., 1:]


# ------------------------------------------------------------------ typed values


@dataclass(frozen=True, eq=False)
class LorentzPoint:
    coords: np.ndarray
    config: ManifoldConfig = field(default_factory=ManifoldConfig)

    def __post_init__(self):
        c = np.array(self.coords, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if not is_on_manifold(c, self.config):
            raise GeometryError(
                f"point is off the hyperboloid: <x,x>_L - 1/K = {lorentz_inner(c, c) - 1 / self.config.K:.3e}, x0 = {c[0] if c.size else float('nan')}"
            )

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    @property
    def dim(self):
        return self.coords.shape[0] - 1

    @classmethod
    def origin(cls, n, config=None):
        config = _config(config)
        return cls(origin(n, config), config)

    @classmethod
    def from_euclidean(cls, e):
        return cls(lift_from_euclidean(e))

    def exp(self, v):
        return LorentzPoint(exp_map(self.coords, v, self.config), self.config)

    def log(self, y):
        return TangentVector(self, log_map(self.coords, y, self.config))

    def distance(self, y):
        return geodesic_distance(self.coords, y, self.config)


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: LorentzPoint
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        _check_tangent(self.base.coords, c, self.base.config)

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    @property
    def norm(self):
        return float(lorentz_norm(self.coords))
