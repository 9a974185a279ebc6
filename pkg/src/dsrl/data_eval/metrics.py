"""Frame-level ranking metrics."""

import numpy as np
from scipy.stats import rankdata

from .. import kernels
from ..errors import ContractError


def _prep(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.float64)
    if s.shape != y.shape:
        raise ContractError(f"{s.size} scores vs {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ContractError("labels must be 0/1")
    return s, y


def average_precision(scores, labels):
    """Sum of (R_n - R_{n-1}) P_n over descending thresholds; equal scores form one threshold."""
    s, y = _prep(scores, labels)
    if not np.any(y == 1):
        raise ContractError("average precision needs at least one positive label")
    return float(kernels.grouped_ap(s, y))


def roc_auc(scores, labels):
    """Mann-Whitney AUC with ties counted as one half, via average ranks."""
    s, y = _prep(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("ROC-AUC needs both positive and negative labels")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))
