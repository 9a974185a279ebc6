"""Cross-space attention between the Euclidean and hyperbolic branches.

Hyperbolic features enter as tangent coordinates at the origin (T x d), so
both branches share the same Euclidean arithmetic; Lorentzian similarities
are taken after lifting the projected queries and keys onto the hyperboloid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor_diff as td
from .errors import DimensionError
from .hypernn import bounded_lift_t, distance_matrix_t, log_origin_t

VARIANTS = ("literal", "standard")
METRICS = ("lorentz", "cosine")
DIRECTIONS = ("e2h", "h2e")


@dataclass
class DsiParams:
    d: int
    weights: dict = field(default_factory=dict)  # "{direction}.{q,k,v}" -> Tensor (d, d)
    lam: float = 0.8
    alpha: float = 0.3
    variant: str = "literal"
    metric: str = "lorentz"
    lift_radius: float = 0.0  # > 0 squashes queries/keys before lifting

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.d < 1:
            raise ValueError("attention dimension must be positive")
        if self.variant not in VARIANTS or self.metric not in METRICS:
            raise ValueError(f"unknown variant/metric {self.variant}/{self.metric}")

    @classmethod
    def init(cls, d, rng, **kw):
        bound = 1.0 / np.sqrt(d)
        w = {
            f"{direction}.{role}": td.parameter(rng.uniform(-bound, bound, size=(d, d)), name=f"dsi.{direction}.{role}")
            for direction in DIRECTIONS
            for role in "qkv"
        }
        return cls(d=d, weights=w, **kw)

    def tensors(self):
        return dict(self.weights)


def similarity_t(Q, Kt, metric="lorentz", lift_radius=0.0):
    if metric == "lorentz":
        return td.exp(-distance_matrix_t(bounded_lift_t(Q, lift_radius), bounded_lift_t(Kt, lift_radius)))
    qn = Q / td.clamp_min(td.norm(Q, axis=-1, keepdims=True), 1e-300)
    kn = Kt / td.clamp_min(td.norm(Kt, axis=-1, keepdims=True), 1e-300)
    return td.matmul(qn, td.transpose(kn))


def thresholded_attention_map(Q, Kt, lam, metric="lorentz", lift_radius=0.0):
    """Similarities at or below lam are set to 0, then each row is softmaxed."""
    Q, Kt = td.as_tensor(Q), td.as_tensor(Kt)
    S = similarity_t(Q, Kt, metric, lift_radius)
    keep = (S.data > lam).astype(np.float64)
    return td.softmax(S * keep, axis=-1)


def cross_space_attention(target, source, p, direction="e2h"):
    """Enhance ``target`` (T x d) with information from ``source`` (T x d).

    literal: softmax over snippets of (A Vk / sqrt(d)), multiplied elementwise by Vv.
    standard: A Vv.
    """
    target, source = td.as_tensor(target), td.as_tensor(source)
    if target.shape != source.shape or target.shape[-1] != p.d:
        raise DimensionError(f"CSA expects matching (T, {p.d}) inputs, got {target.shape} and {source.shape}")
    w = p.weights
    Vq = td.matmul(target, w[f"{direction}.q"])
    Vk = td.matmul(source, w[f"{direction}.k"])
    Vv = td.matmul(source, w[f"{direction}.v"])
    A = thresholded_attention_map(Vq, Vk, p.lam, p.metric, p.lift_radius)
    if p.variant == "standard":
        return td.matmul(A, Vv)
    return td.softmax(td.matmul(A, Vk) / np.sqrt(p.d), axis=0) * Vv


@dataclass
class DualRepresentation:
    V_E: td.Tensor
    V_H: td.Tensor  # hyperboloid points (T, d+1)
    V_F: td.Tensor
    V_E_prime: td.Tensor = None
    V_H_prime: td.Tensor = None  # tangent coordinates at the origin (T, d)


def maxpool_interleaved(A, B):
    """Concatenate along features with A_i and B_i adjacent, then max-pool (2, stride 2)."""
    T, d = A.shape
    inter = td.reshape(td.concat([td.reshape(A, (T, d, 1)), td.reshape(B, (T, d, 1))], axis=-1), (T, 2 * d))
    return td.max_pool1d(inter, 2, 2, axis=-1)


def dual_space_fuse(V_E, V_H, p):
    V_E = td.as_tensor(V_E)
    V_H = td.as_tensor(V_H)
    H = log_origin_t(V_H)
    if p.alpha == 0:
        E2, H2 = V_E, H
    else:
        E2 = cross_space_attention(V_E, H, p, "e2h") * p.alpha + V_E
        H2 = cross_space_attention(H, E2, p, "h2e") * p.alpha + H
    V_F = maxpool_interleaved(E2, H2)
    return DualRepresentation(V_E, V_H, V_F, E2, H2)
