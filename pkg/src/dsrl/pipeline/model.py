"""Model assembly: preprocessing, the two branches, fusion and the classifier."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .. import tensor_diff as td
from ..dsi import DsiParams, dual_space_fuse
from ..errors import ConfigError, GeometryError, IngestionError
from ..graphs import (
    LshadParams,
    TemporalParams,
    euclid_cosine_adjacency_t,
    gcn_layer,
    he_gcn_layer,
    row_normalize,
    temporal_adjacency,
    temporal_hgcn_layer,
)
from ..hypernn import (
    HyperClassifierParams,
    HyperLinearParams,
    hyper_classifier,
    bounded_lift_t,
    log_origin_t,
)
from ..kernels import membership_residual

ABLATIONS = ("none", "euclidean-only", "no-dsi", "cosine-dsi", "fixed-threshold")


@dataclass
class ModelConfig:
    d: int = 32
    layers: int = 2
    beta: float = 0.8
    gamma: float = 1.2
    sigma: float = math.e
    lam: float = 0.8
    alpha: float = 0.3
    dropout: float = 0.6
    eps: float = 1.0
    epochs: int = 30
    batch: int = 8  # full-scale setting: 256
    lr: float = 1e-3
    seed: int = 0
    d_v: int = 24  # full-scale setting: 1024 (I3D)
    d_a: int = 16  # full-scale setting: 128 (VGGish)
    multimodal: bool = True
    ablate: str = "none"
    fixed_threshold: float = 0.5
    hl_scale: float = 1.0
    lift_radius: float = 2.0  # 0 disables the pre-lift squash
    hyper_mode: str = "activation_norm"
    csa_variant: str = "literal"
    debug_manifold: bool = False

    def __post_init__(self):
        if self.ablate not in ABLATIONS:
            raise ConfigError(f"ablate must be one of {ABLATIONS}, got {self.ablate!r}")
        if self.d < 2 or self.d % 2:
            raise ConfigError("branch dim d must be an even integer >= 2")
        for name in ("layers", "epochs", "batch", "d_v"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.multimodal and self.d_a < 1:
            raise ConfigError("multimodal model needs d_a >= 1")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must be in [0, 1)")
        if self.lift_radius < 0:
            raise ConfigError("lift_radius must be >= 0")
        if not (self.lr > 0 and self.eps > 0 and self.sigma > 0 and self.hl_scale > 0):
            raise ConfigError("lr, eps, sigma and hl_scale must be positive")
        if not 0 < self.fixed_threshold < 1:
            raise ConfigError("fixed_threshold must lie in (0, 1)")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)

    @property
    def lshad_params(self):
        return LshadParams(self.beta, self.gamma)

    @property
    def temporal_params(self):
        return TemporalParams(self.sigma)


def _dense(rng, fan_in, fan_out, name):
    bound = 1.0 / math.sqrt(fan_in)
    return td.parameter(rng.uniform(-bound, bound, size=(fan_in, fan_out)), name=name)


class Model:
    """Parameters plus the structured views each layer expects.

    ``params`` is the flat name -> Tensor map that the optimizer and the
    checkpoint see; the views share the same Tensor objects.
    """

    def __init__(self, cfg, params=None):
        self.cfg = cfg
        if params is None:
            params = self._init_params(np.random.default_rng(cfg.seed))
        self.params = params
        self._bind()

    def _init_params(self, rng):
        cfg = self.cfg
        d, h = cfg.d, cfg.d // 2
        p = {}
        p["pre.conv_v"] = _dense(rng, 3 * cfg.d_v, d, "pre.conv_v")
        if cfg.multimodal:
            p["pre.conv_a"] = _dense(rng, 3 * cfg.d_a, d, "pre.conv_a")
            p["pre.proj"] = _dense(rng, 2 * d, d, "pre.proj")
        else:
            p["pre.proj"] = _dense(rng, d, d, "pre.proj")
        for graph in ("sem", "tmp"):
            p[f"euc.{graph}1"] = _dense(rng, d, h, f"euc.{graph}1")
            for layer in range(2, cfg.layers + 1):
                p[f"euc.{graph}{layer}"] = _dense(rng, h, h, f"euc.{graph}{layer}")
        if cfg.ablate != "euclidean-only":
            for graph in ("sem", "tmp"):
                for layer in range(1, cfg.layers + 1):
                    n_in = d if layer == 1 else h
                    hl = HyperLinearParams.init(n_in, h, rng, cfg.hyper_mode, cfg.hl_scale, f"hyp.{graph}{layer}.")
                    for k, t in hl.tensors().items():
                        p[f"hyp.{graph}{layer}.{k}"] = t
        if cfg.ablate not in ("euclidean-only", "no-dsi"):
            for k, t in DsiParams.init(d, rng).tensors().items():
                p[f"dsi.{k}"] = t
        cls_dim = 2 * d if cfg.ablate == "no-dsi" else d
        for k, t in HyperClassifierParams.init(cls_dim, rng, cfg.eps, "cls.").tensors().items():
            p[f"cls.{k}"] = t
        return p

    def _bind(self):
        cfg, p = self.cfg, self.params
        self.hyp = {}
        if cfg.ablate != "euclidean-only":
            for graph in ("sem", "tmp"):
                for layer in range(1, cfg.layers + 1):
                    pre = f"hyp.{graph}{layer}."
                    self.hyp[(graph, layer)] = HyperLinearParams(
                        p[pre + "W"], p[pre + "v"], p[pre + "b"], p[pre + "b_prime"], cfg.hl_scale, cfg.hyper_mode
                    )
        self.dsi = None
        if cfg.ablate not in ("euclidean-only", "no-dsi"):
            w = {k[len("dsi."):]: t for k, t in p.items() if k.startswith("dsi.")}
            metric = "cosine" if cfg.ablate == "cosine-dsi" else "lorentz"
            self.dsi = DsiParams(cfg.d, w, cfg.lam, cfg.alpha, cfg.csa_variant, metric, cfg.lift_radius)
        self.classifier = HyperClassifierParams(p["cls.W"], p["cls.b"], cfg.eps)

    def param_count(self):
        return int(sum(t.size for t in self.params.values()))


# ------------------------------------------------------------------ components


def temporal_conv(X, W):
    """Kernel-3 same-padded temporal convolution as one matmul over stacked shifts."""
    T, c = X.shape
    pad = td.as_tensor(np.zeros((1, c)))
    Xp = td.concat([pad, X, pad], axis=0)
    stacked = td.concat([Xp[0:T], Xp[1 : T + 1], Xp[2 : T + 2]], axis=1)
    return td.matmul(stacked, W)


def preprocess_features(f, model):
    """Temporal conv + relu per modality, audio enhanced by attention over visual, concat, project."""
    p = model.params
    V = td.relu(temporal_conv(td.as_tensor(np.asarray(f.visual, dtype=np.float64)), p["pre.conv_v"]))
    if not model.cfg.multimodal or f.audio is None:
        if model.cfg.multimodal:
            raise ConfigError(f"{f.id}: multimodal model given a video without audio")
        return td.matmul(V, p["pre.proj"])
    if f.audio.shape[0] != f.visual.shape[0]:
        raise IngestionError(f"audio has {f.audio.shape[0]} snippets, visual has {f.visual.shape[0]}", f.id)
    Aud = td.relu(temporal_conv(td.as_tensor(np.asarray(f.audio, dtype=np.float64)), p["pre.conv_a"]))
    d = V.shape[1]
    att = td.softmax(td.matmul(Aud, td.transpose(V)) / math.sqrt(d), axis=-1)
    enhanced = Aud + td.matmul(att, V)
    return td.matmul(td.concat([V, enhanced], axis=1), p["pre.proj"])


def euclidean_branch(X, model, A_temporal_rows):
    p, L = model.params, model.cfg.layers
    A_sem = euclid_cosine_adjacency_t(X)
    outs = []
    for graph, A in (("sem", A_sem), ("tmp", A_temporal_rows)):
        H = X
        for layer in range(1, L + 1):
            H = gcn_layer(H, A, p[f"euc.{graph}{layer}"])
        outs.append(H)
    return td.concat(outs, axis=1)


def _check_manifold(points, where):
    r = membership_residual(np.ascontiguousarray(points.data), -1.0)
    if np.max(r) > 1e-9:
        raise GeometryError(f"{where}: manifold residual {np.max(r):.3e}")


def hyperbolic_branch(X, model, A_temporal, training, rng, traces=None):
    cfg = model.cfg
    P0 = bounded_lift_t(X, cfg.lift_radius)
    fixed = cfg.fixed_threshold if cfg.ablate == "fixed-threshold" else None
    H = P0
    for layer in range(1, cfg.layers + 1):
        H, tr = he_gcn_layer(H, layer, model.hyp[("sem", layer)], cfg.lshad_params, training, rng, fixed)
        if traces is not None:
            traces.append(tr)
        if cfg.debug_manifold:
            _check_manifold(H, f"HE-GCN layer {layer}")
    Tm = P0
    for layer in range(1, cfg.layers + 1):
        Tm = temporal_hgcn_layer(Tm, model.hyp[("tmp", layer)], A_temporal, training, rng)
        if cfg.debug_manifold:
            _check_manifold(Tm, f"temporal layer {layer}")
    V_H = bounded_lift_t(td.concat([log_origin_t(H), log_origin_t(Tm)], axis=1), cfg.lift_radius)
    if cfg.debug_manifold:
        _check_manifold(P0, "lift")
        _check_manifold(V_H, "branch concat")
    return V_H


def snippet_scores_t(f, model, training=False, rng=None, traces=None):
    """Differentiable per-snippet scores, shape (T,)."""
    cfg = model.cfg
    X = preprocess_features(f, model)
    if training and cfg.dropout > 0:
        X = td.dropout(X, cfg.dropout, rng, training=True)
    T = X.shape[0]
    A_t = temporal_adjacency(T, cfg.temporal_params).A
    V_E = euclidean_branch(X, model, row_normalize(A_t))
    if cfg.ablate == "euclidean-only":
        F = bounded_lift_t(V_E, cfg.lift_radius)
    else:
        V_H = hyperbolic_branch(X, model, A_t, training, rng, traces)
        if cfg.ablate == "no-dsi":
            F = bounded_lift_t(td.concat([V_E, log_origin_t(V_H)], axis=1), cfg.lift_radius)
        else:
            F = bounded_lift_t(dual_space_fuse(V_E, V_H, model.dsi).V_F, cfg.lift_radius)
    if cfg.debug_manifold:
        _check_manifold(F, "classifier input")
    return hyper_classifier(F, model.classifier)
