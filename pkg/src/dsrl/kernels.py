"""Hot numeric loops, each with a numba kernel and a numpy twin.

The public names at the bottom resolve to the numba version unless
``DSRL_DISABLE_NUMBA`` is set (see ``_accel``). Both twins stay importable
so the benchmark and the tests can compare them directly.

All kernels work on float64 arrays of stacked hyperboloid coordinates,
shape ``(T, n+1)`` with the time coordinate first.
"""

import math

import numpy as np

from ._accel import njit, select, USE_NUMBA

# ---------------------------------------------------------------- numpy twins

_FAR = 1.0  # switch point between the two evaluations of q


def lorentz_gram_np(X, Y):
    G = X[:, 1:] @ Y[:, 1:].T
    G -= np.outer(X[:, 0], Y[:, 0])
    return G


def pairwise_distance_np(X, Y, K):
    # 2 asinh(sqrt(q/2)), q = -K <x-y, x-y>_L / 2 = K<x,y>_L - 1 on the sheet;
    # unlike arccosh(K<x,y>_L) it keeps full precision for nearby points.
    # Far apart the difference form cancels instead, so there q comes from the
    # Gram entry, which is accurate once it exceeds 1.
    diff = X[:, None, :] - Y[None, :, :]
    q = -0.5 * K * (np.sum(diff[..., 1:] ** 2, axis=-1) - diff[..., 0] ** 2)
    q_far = K * lorentz_gram_np(X, Y) - 1.0
    q = np.where(q_far > _FAR, q_far, q)
    return 2.0 * np.arcsinh(np.sqrt(np.maximum(q, 0.0) * 0.5))


def dirichlet_energy_np(X, K):
    D = pairwise_distance_np(X, X, K)
    return 0.5 * float(np.sum(D * D))


def membership_residual_np(X, K):
    """Per-row |<x,x>_L - 1/K|; rows on the lower sheet get +inf."""
    q = np.sum(X[:, 1:] ** 2, axis=1) - X[:, 0] ** 2
    r = np.abs(q - 1.0 / K)
    return np.where(X[:, 0] > 0, r, np.inf)


def temporal_adjacency_np(T, sigma):
    idx = np.arange(T, dtype=np.float64)
    return np.exp(-np.abs(idx[:, None] - idx[None, :]) / sigma)


def grouped_ap_np(scores, labels):
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order].astype(np.float64)
    tp = np.cumsum(y)
    n = np.arange(1, len(s) + 1, dtype=np.float64)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    tp_g = tp[ends]
    prec = tp_g / n[ends]
    rec = tp_g / tp[-1]
    rec_prev = np.concatenate(([0.0], rec[:-1]))
    return float(np.sum((rec - rec_prev) * prec))


def pair_auc_np(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    diff = pos[:, None] - neg[None, :]
    wins = np.sum(diff > 0) + 0.5 * np.sum(diff == 0)
    return float(wins) / (len(pos) * len(neg))


# --------------------------------------------------------------- numba kernels


def _lorentz_gram(X, Y):
    n, m, p = X.shape[0], Y.shape[0], X.shape[1]
    G = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = -X[i, 0] * Y[j, 0]
            for k in range(1, p):
                acc += X[i, k] * Y[j, k]
            G[i, j] = acc
    return G


def _q_pair_py(X, i, Y, j, K):
    t = X[i, 0] - Y[j, 0]
    acc = -t * t
    g = -X[i, 0] * Y[j, 0]
    for k in range(1, X.shape[1]):
        t = X[i, k] - Y[j, k]
        acc += t * t
        g += X[i, k] * Y[j, k]
    q_far = K * g - 1.0
    return q_far if q_far > _FAR else -0.5 * K * acc


_q_pair = njit(_q_pair_py) or _q_pair_py


def _pairwise_distance(X, Y, K):
    n, m = X.shape[0], Y.shape[0]
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            q = _q_pair(X, i, Y, j, K)
            D[i, j] = 2.0 * math.asinh(math.sqrt(q * 0.5)) if q > 0.0 else 0.0
    return D


def _dirichlet_energy(X, K):
    n = X.shape[0]
    total = 0.0
    # symmetric; diagonal is zero
    for i in range(n):
        for j in range(i + 1, n):
            q = _q_pair(X, i, X, j, K)
            if q > 0.0:
                d = 2.0 * math.asinh(math.sqrt(q * 0.5))
                total += d * d
    return total


def _membership_residual(X, K):
    n, p = X.shape
    out = np.empty(n)
    for i in range(n):
        if X[i, 0] <= 0.0:
            out[i] = np.inf
            continue
        q = -X[i, 0] * X[i, 0]
        for k in range(1, p):
            q += X[i, k] * X[i, k]
        out[i] = abs(q - 1.0 / K)
    return out


def _temporal_adjacency(T, sigma):
    A = np.empty((T, T))
    for i in range(T):
        for j in range(T):
            A[i, j] = math.exp(-abs(i - j) / sigma)
    return A


def _grouped_ap(scores, labels):
    order = np.argsort(-scores, kind="mergesort")
    n = scores.shape[0]
    n_pos = 0.0
    for i in range(n):
        n_pos += labels[i]
    tp = 0.0
    ap = 0.0
    rec_prev = 0.0
    for i in range(n):
        tp += labels[order[i]]
        if i == n - 1 or scores[order[i + 1]] != scores[order[i]]:
            rec = tp / n_pos
            ap += (rec - rec_prev) * (tp / (i + 1))
            rec_prev = rec
    return ap


def _pair_auc(scores, labels):
    wins = 0.0
    n_pos = 0
    n_neg = 0
    for i in range(scores.shape[0]):
        if labels[i] == 1:
            n_pos += 1
        else:
            n_neg += 1
    for i in range(scores.shape[0]):
        if labels[i] != 1:
            continue
        for j in range(scores.shape[0]):
            if labels[j] != 0:
                continue
            if scores[i] > scores[j]:
                wins += 1.0
            elif scores[i] == scores[j]:
                wins += 0.5
    return wins / (n_pos * n_neg)


lorentz_gram_nb = njit(_lorentz_gram)
pairwise_distance_nb = njit(_pairwise_distance)
dirichlet_energy_nb_raw = njit(_dirichlet_energy)
membership_residual_nb = njit(_membership_residual)
temporal_adjacency_nb = njit(_temporal_adjacency)
grouped_ap_nb = njit(_grouped_ap)
pair_auc_nb = njit(_pair_auc)


def dirichlet_energy_nb(X, K):
    # double loop covers i<j only; the full sum counts each pair twice, halved
    return float(dirichlet_energy_nb_raw(X, K))


# ------------------------------------------------------------- public selection

lorentz_gram = select(lorentz_gram_nb, lorentz_gram_np)
pairwise_distance = select(pairwise_distance_nb, pairwise_distance_np)
dirichlet_energy = select(
    dirichlet_energy_nb if dirichlet_energy_nb_raw is not None else None,
    dirichlet_energy_np,
)
membership_residual = select(membership_residual_nb, membership_residual_np)
temporal_adjacency = select(temporal_adjacency_nb, temporal_adjacency_np)
grouped_ap = select(grouped_ap_nb, grouped_ap_np)
pair_auc = select(pair_auc_nb, pair_auc_np)

BACKEND = "numba" if USE_NUMBA else "numpy"
