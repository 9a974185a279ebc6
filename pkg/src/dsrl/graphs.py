"""Message graphs over the T snippets of a video, in both geometries.

Adjacencies are dense T x T arrays (T is small). Functions named ``*_t`` are
differentiable and take/return ``Tensor``; the rest are exact numpy helpers
used for graph construction decisions and as test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import tensor_diff as td
from .errors import ContractError, GeometryError, IsolatedNodeError
from .hypernn import distance_matrix_t, hyper_linear
from .manifold import DEFAULT_K, ManifoldConfig, geodesic_distance, lorentz_inner, log_map, exp_map, origin

KINDS = ("semantic", "temporal")
SPACES = ("hyperbolic", "euclidean")


@dataclass
class MessageGraph:
    A: np.ndarray
    kind: str = "semantic"
    space: str = "hyperbolic"
    layer_index: int = 1

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ContractError(f"adjacency must be square, got {self.A.shape}")
        if np.any(self.A < 0):
            raise ContractError("adjacency entries must be nonnegative")
        if self.kind not in KINDS or self.space not in SPACES:
            raise ContractError(f"bad graph tag {self.kind}/{self.space}")

    @property
    def T(self):
        return self.A.shape[0]

    def nnz(self):
        return int(np.count_nonzero(self.A))


@dataclass(frozen=True)
class LshadParams:
    beta: float = 0.8
    gamma: float = 1.2

    def __post_init__(self):
        if not (math.isfinite(self.beta) and math.isfinite(self.gamma)):
            raise ValueError("beta and gamma must be finite")


@dataclass(frozen=True)
class TemporalParams:
    sigma: float = math.e

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def _rows(points):
    return np.ascontiguousarray(np.atleast_2d(np.asarray([np.asarray(p) for p in points], dtype=np.float64)))


def _softmax_rows(M):
    z = M - M.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


# ----------------------------------------------------------- similarity graphs


def lorentz_similarity(x, y, K=DEFAULT_K):
    return math.exp(-geodesic_distance(x, y, ManifoldConfig(K=K)))


def similarity_matrix(points, K=DEFAULT_K):
    X = _rows(points)
    return np.exp(-kernels.pairwise_distance(X, X, K))


def semantic_adjacency(points, K=DEFAULT_K, layer_index=1):
    """Row softmax of pairwise Lorentzian similarities exp(-d)."""
    return MessageGraph(_softmax_rows(similarity_matrix(points, K)), "semantic", "hyperbolic", layer_index)


def semantic_adjacency_t(X, K=DEFAULT_K):
    """Differentiable twin: returns (A tensor, similarity array)."""
    S = td.exp(-distance_matrix_t(X, X, K))
    return td.softmax(S, axis=-1), S.data


def temporal_adjacency(T, p=None):
    p = p or TemporalParams()
    if T < 1:
        raise ContractError("T must be at least 1")
    return MessageGraph(kernels.temporal_adjacency(int(T), float(p.sigma)), "temporal", "hyperbolic")


# ------------------------------------------------------------ energy and LSHAD


def hyperbolic_dirichlet_energy(points, K=DEFAULT_K):
    """Half the sum over ordered pairs of squared geodesic distances."""
    X = _rows(points)
    return kernels.dirichlet_energy(X, K)


def hyperbolic_dirichlet_energy_degree(points, degrees, K=DEFAULT_K):
    """Degree-normalised form: points are shrunk towards the origin by 1/sqrt(1+d_i)."""
    X = _rows(points)
    n = X.shape[1] - 1
    o = np.broadcast_to(origin(n), X.shape)
    v = log_map(o, X) / np.sqrt(1.0 + np.asarray(degrees, dtype=np.float64))[:, None]
    Y = exp_map(o, v)
    return kernels.dirichlet_energy(np.ascontiguousarray(Y), K)


def lshad(E, k, p=None):
    """sigmoid(beta*k - gamma + 1/(E+1)); E may be +inf."""
    p = p or LshadParams()
    if E < 0 or k < 1:
        raise ContractError(f"lshad needs E >= 0 and k >= 1, got E={E}, k={k}")
    z = p.beta * k - p.gamma + (0.0 if math.isinf(E) else 1.0 / (E + 1.0))
    return 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))


def apply_lshad_rule(G, theta, scores=None):
    """Zero every entry whose score is below theta; kept entries are unchanged.

    ``scores`` defaults to the adjacency itself. Passing the raw Lorentzian
    similarity matrix thresholds on similarity while keeping the softmax
    weights of the surviving edges.
    """
    if not 0 < theta < 1:
        raise ContractError(f"threshold must lie in (0, 1), got {theta}")
    S = G.A if scores is None else np.asarray(scores)
    return MessageGraph(np.where(S >= theta, G.A, 0.0), G.kind, G.space, G.layer_index)


def self_loop_fallback(A):
    """Give every all-zero row a unit self-loop. Returns (A', isolated row indices)."""
    A = np.array(A, dtype=np.float64, copy=True)
    iso = np.flatnonzero(~np.any(A > 0, axis=1))
    A[iso, iso] = 1.0
    return A, iso


# ------------------------------------------------------------------ aggregation


def hyperbolic_aggregate(G, points, K=DEFAULT_K):
    """Weighted Minkowski sum of each row's neighbours, rescaled back onto the hyperboloid."""
    A = G.A if isinstance(G, MessageGraph) else np.asarray(G, dtype=np.float64)
    X = _rows(points)
    zero = ~np.any(A != 0, axis=1)
    if np.any(zero):
        raise IsolatedNodeError(f"rows {np.flatnonzero(zero).tolist()} have no neighbours")
    V = A @ X
    q = lorentz_inner(V, V)
    if np.any(q >= 0):
        raise GeometryError("aggregated vector is not timelike")
    return V / (np.sqrt(-K) * np.sqrt(np.abs(q)))[:, None]


def hyperbolic_aggregate_t(A, X, K=DEFAULT_K):
    A = td.as_tensor(A)
    V = td.matmul(A, X)
    q = td.tsum(V * V * np.r_[-1.0, np.ones(X.shape[-1] - 1)], axis=-1, keepdims=True)
    if np.any(q.data >= 0):
        raise GeometryError("aggregated vector is not timelike")
    return V / (td.sqrt(-q) * np.sqrt(-K))


@dataclass
class LayerTrace:
    """What one HE-GCN layer decided; used for diagnostics and tests."""

    k: int
    energy: float
    threshold: float
    kept_edges: int
    isolated: list = field(default_factory=list)


def he_gcn_layer(X, k, params, lshad_params=None, training=False, rng=None,
                 fixed_threshold=None, dropout_rate=0.0, K=DEFAULT_K):
    """One energy-constrained hyperbolic graph convolution over stacked points X.

    hyper_linear -> Lorentzian-similarity softmax graph -> Dirichlet energy ->
    LSHAD threshold on similarities -> hyperbolic aggregation. The threshold is
    a constant with respect to gradients; only the surviving edge weights and
    the node features carry gradient. Returns (points, LayerTrace).
    """
    if k < 1:
        raise ContractError("layer index k starts at 1")
    Y = hyper_linear(X, params, training=training, rng=rng, dropout_rate=dropout_rate, K=K)
    A, S = semantic_adjacency_t(Y, K)
    energy = kernels.dirichlet_energy(np.ascontiguousarray(Y.data), K)
    theta = fixed_threshold if fixed_threshold is not None else lshad(energy, k, lshad_params)
    mask = (S >= theta).astype(np.float64)
    mask, iso = self_loop_fallback(mask)
    A_kept = A * mask
    if len(iso):
        # a fallback self-loop carries weight 1, not the softmax entry
        fix = np.zeros_like(mask)
        fix[iso, iso] = 1.0
        A_kept = A_kept * (1.0 - fix) + fix
    out = hyperbolic_aggregate_t(A_kept, Y, K)
    return out, LayerTrace(k, energy, float(theta), int(np.count_nonzero(mask)), iso.tolist())


def temporal_hgcn_layer(X, params, A_temporal, training=False, rng=None, dropout_rate=0.0, K=DEFAULT_K):
    Y = hyper_linear(X, params, training=training, rng=rng, dropout_rate=dropout_rate, K=K)
    return hyperbolic_aggregate_t(A_temporal, Y, K)


# -------------------------------------------------------------- Euclidean side


def euclid_cosine_adjacency(X):
    """Row softmax of relu(cosine similarity); zero rows have similarity 0 to everything."""
    X = np.asarray(X, dtype=np.float64)
    n = np.linalg.norm(X, axis=1, keepdims=True)
    Xn = np.where(n > 0, X / np.where(n > 0, n, 1.0), 0.0)
    C = np.maximum(Xn @ Xn.T, 0.0)
    return MessageGraph(_softmax_rows(C), "semantic", "euclidean")


def euclid_cosine_adjacency_t(X):
    n = td.clamp_min(td.norm(X, axis=-1, keepdims=True), 1e-300)
    Xn = X / n
    return td.softmax(td.relu(td.matmul(Xn, td.transpose(Xn))), axis=-1)


def gcn_layer(X, G, W):
    """relu(A X W). Accepts arrays or Tensors; returns the same kind as X."""
    A = G.A if isinstance(G, MessageGraph) else G
    if isinstance(X, td.Tensor) or isinstance(W, td.Tensor) or isinstance(A, td.Tensor):
        return td.relu(td.matmul(td.matmul(td.as_tensor(A), td.as_tensor(X)), td.as_tensor(W)))
    return np.maximum(np.asarray(A) @ np.asarray(X) @ np.asarray(W), 0.0)


def row_normalize(A):
    A = np.asarray(A, dtype=np.float64)
    return A / A.sum(axis=1, keepdims=True)
