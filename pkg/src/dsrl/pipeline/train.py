"""MIL objective, training loop and frame-level evaluation."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import tensor_diff as td
from .._accel import thread_cap
from ..data_eval.metrics import average_precision, roc_auc
from ..errors import ContractError, TrainingDivergedError
from .model import Model, snippet_scores_t

log = logging.getLogger(__name__)

LOG_CLAMP = 1e-12


@dataclass
class DetectionScores:
    snippet_scores: np.ndarray
    video_score: float
    k_used: int


def mil_k(T):
    return T // 16 + 1


def mil_video_score(snippet_scores):
    """Mean of the top floor(T/16)+1 scores. Returns (score, k)."""
    s = np.asarray(snippet_scores, dtype=np.float64)
    if s.size < 1:
        raise ContractError("need at least one snippet score")
    k = mil_k(s.size)
    return float(np.mean(np.sort(s)[::-1][:k])), k


def mil_video_score_t(scores):
    k = mil_k(scores.shape[0])
    top = np.argsort(-scores.data, kind="stable")[:k]
    return td.mean(scores[top]), k


def bce_loss(preds, labels):
    """Mean binary cross-entropy with logs clamped at 1e-12. Accepts arrays or a Tensor."""
    y = np.asarray(labels, dtype=np.float64).ravel()
    if y.size == 0:
        raise ContractError("empty batch")
    if isinstance(preds, td.Tensor):
        p = td.reshape(preds, (-1,))
        pos = td.log(td.clamp_min(p, LOG_CLAMP))
        neg = td.log(td.clamp_min(1.0 - p, LOG_CLAMP))
        return -td.mean(pos * y + neg * (1.0 - y))
    p = np.asarray(preds, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ContractError(f"{p.size} predictions vs {y.size} labels")
    return float(-np.mean(y * np.log(np.maximum(p, LOG_CLAMP)) + (1 - y) * np.log(np.maximum(1 - p, LOG_CLAMP))))


def forward(f, model, training=False, rng=None):
    """Score one video. Deterministic in eval mode; training mode draws dropout from ``rng``."""
    with td.no_grad():
        s = snippet_scores_t(f, model, training, rng).data.copy()
    v, k = mil_video_score(s)
    return DetectionScores(s, v, k)


def _streams(seed):
    shuffle, drop = np.random.SeedSequence([seed, 1]).spawn(2)
    return np.random.default_rng(shuffle), np.random.default_rng(drop)


def dataset_loss(videos, model):
    """Eval-mode BCE over all videos in one batch."""
    preds = [forward(f, model).video_score for f in videos]
    return bce_loss(preds, [f.video_label for f in videos])


def train(videos, cfg, val=None, model=None, on_epoch=None):
    """Mini-batch Adam over shuffled videos. Returns (model, log entries)."""
    if not videos:
        raise ContractError("training set is empty")
    model = model or Model(cfg)
    state = td.OptimizerState(total_epochs=cfg.epochs, lr=cfg.lr)
    shuffle_rng, drop_rng = _streams(cfg.seed)
    entries = []
    names = {id(t): n for n, t in model.params.items()}
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(videos))
        losses = []
        for b0 in range(0, len(order), cfg.batch):
            batch = [videos[i] for i in order[b0 : b0 + cfg.batch]]
            preds = [mil_video_score_t(snippet_scores_t(f, model, True, drop_rng))[0] for f in batch]
            loss = bce_loss(td.concat([td.reshape(p, (1,)) for p in preds]), [f.video_label for f in batch])
            if not math.isfinite(loss.item()):
                norms = {n: float(np.linalg.norm(t.data)) for n, t in model.params.items()}
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {b0 // cfg.batch}; parameter norms {norms}"
                )
            leaves = td.backward(loss)
            grads = {names[id(t)]: g for t, g in leaves.items() if id(t) in names}
            td.adam_step(model.params, grads, state, epoch)
            losses.append(loss.item())
        entry = {
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "lr": td.cosine_lr(epoch, cfg.epochs, cfg.lr),
            "val_ap": None,
        }
        if val:
            entry["val_ap"] = evaluate(val, model)["ap"]
        log.info("epoch %d loss %.4f lr %.2e val_ap %s", epoch, entry["loss"], entry["lr"], entry["val_ap"])
        entries.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    return model, entries


def score_videos(videos, model, workers=None):
    """Eval-mode scores for every video, ordered by id.

    Videos are independent in eval mode, so they are scored on up to
    ``workers`` threads (default: the DSRL_THREADS cap); the result order does
    not depend on the thread count.
    """
    ordered = sorted(videos, key=lambda f: f.id)
    workers = thread_cap() if workers is None else max(1, int(workers))
    if workers == 1 or len(ordered) < 2:
        return [(f, forward(f, model)) for f in ordered]
    with ThreadPoolExecutor(max_workers=min(workers, len(ordered))) as pool:
        return list(zip(ordered, pool.map(lambda f: forward(f, model), ordered)))


def evaluate(videos, model, scored=None):
    """Frame-level AP and ROC-AUC over the concatenated snippets of ``videos``."""
    if any(f.frame_labels is None for f in videos):
        raise ContractError("evaluation needs frame labels on every video")
    scored = scored or score_videos(videos, model)
    s = np.concatenate([d.snippet_scores for _, d in scored])
    y = np.concatenate([f.frame_labels for f, _ in scored]).astype(np.float64)
    report = {"ap": average_precision(s, y), "auc": None, "n_videos": len(scored), "n_snippets": int(s.size)}
    if 0 < y.sum() < y.size:
        report["auc"] = roc_auc(s, y)
    return report
