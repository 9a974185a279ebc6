"""Synthetic videos built from a hierarchy of events.

Each category (normal / violent) has subcategories; each subcategory has
three phases (pre-event trend, action, post-event behaviour). Centroids are
nested: a phase centroid is its subcategory centroid plus a smaller offset,
which is the subcategory centroid plus a larger offset from the category.

An *ambiguous* normal event replaces its action-phase centroids (visual and
audio) with those of the nearest violent action, so the action snippets
alone look violent and only the surrounding phases tell them apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .featurefile import FeatureSequence

CATEGORIES = ("normal", "violent")
PHASES = ("pre", "action", "post")


@dataclass(frozen=True)
class SynthSpec:
    num_videos: int = 200
    t_min: int = 16
    t_max: int = 64
    d_v: int = 24
    d_a: int = 16
    depth: int = 3
    n_sub: int = 3
    ambiguity: float = 0.3
    noise: float = 0.5
    violent_fraction: float = 0.5
    multimodal: bool = True
    seed: int = 0
    # offset scale of the two top-level categories from a shared mean
    category_spread: float = 2.0
    # offset scale of a subcategory from its category; each deeper level halves it
    spread: float = 1.0
    phase_len: tuple = (2, 5)

    def __post_init__(self):
        if self.num_videos < 1:
            raise ContractError("num_videos must be at least 1")
        if not 1 <= self.t_min <= self.t_max:
            raise ContractError(f"bad T range [{self.t_min}, {self.t_max}]")
        if not 0 <= self.ambiguity <= 1:
            raise ContractError("ambiguity rate must be in [0, 1]")
        if self.depth < 2:
            raise ContractError("taxonomy depth must be at least 2")
        if self.spread < 0 or self.category_spread < 0:
            raise ContractError("centroid spreads must be non-negative")
        if self.noise < 0 or self.n_sub < 1 or self.d_v < 1 or (self.multimodal and self.d_a < 1):
            raise ContractError("noise >= 0, n_sub >= 1 and positive feature dims required")


@dataclass
class Taxonomy:
    """Centroids keyed by (category, subcategory, phase) for each modality."""

    visual: dict
    audio: dict
    ambiguous_action: dict  # normal subcategory -> visual centroid borrowed from a violent action
    ambiguous_audio: dict = None  # same borrowing for the audio centroid

    def violent_centroids(self):
        return np.array([c for (cat, _, _), c in sorted(self.visual.items()) if cat == "violent"])


def _rngs(seed):
    tax, vids = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(tax), np.random.default_rng(vids)


def _centroids(spec, dim, rng):
    scale = spec.spread
    out = {}
    cats = {c: rng.normal(0.0, spec.category_spread, dim) for c in CATEGORIES}
    for cat in CATEGORIES:
        for s in range(spec.n_sub):
            sub = cats[cat] + rng.normal(0.0, scale, dim)
            # depth beyond 3 adds finer nested offsets before the phase split
            node = sub
            for level in range(3, spec.depth):
                node = node + rng.normal(0.0, scale / 2 ** (level - 1), dim)
            for ph in PHASES:
                if spec.depth >= 3:
                    out[(cat, s, ph)] = node + rng.normal(0.0, scale / 2 ** (spec.depth - 1), dim)
                else:
                    out[(cat, s, ph)] = node.copy()
    return out


def make_taxonomy(spec):
    rng, _ = _rngs(spec.seed)
    visual = _centroids(spec, spec.d_v, rng)
    audio = _centroids(spec, spec.d_a, rng) if spec.multimodal else {}
    violent_actions = [(k, c) for k, c in visual.items() if k[0] == "violent" and k[2] == "action"]
    amb, amb_audio = {}, {}
    for s in range(spec.n_sub):
        c = visual[("normal", s, "action")]
        key, best = min(violent_actions, key=lambda kc: float(np.sum((kc[1] - c) ** 2)))
        amb[s] = best
        if spec.multimodal:
            amb_audio[s] = audio[key]
    return Taxonomy(visual, audio, amb, amb_audio)


def _video(spec, tax, rng, violent, vid):
    T = int(rng.integers(spec.t_min, spec.t_max + 1))
    lo, hi = spec.phase_len
    events = []
    t = 0
    while t < T:
        lens = rng.integers(lo, hi + 1, size=3)
        events.append({"start": t, "lens": lens, "sub": int(rng.integers(spec.n_sub))})
        t += int(lens.sum())
    for e in events:
        e["violent"] = False
        e["ambiguous"] = bool(rng.random() < spec.ambiguity)
    if violent:
        # only events whose action phase starts inside the clip can carry the label
        cand = [i for i, e in enumerate(events) if e["start"] + e["lens"][0] < T]
        forced = cand[int(rng.integers(len(cand)))]
        for i in cand:
            if i == forced or rng.random() < 0.3:
                events[i]["violent"] = True
                events[i]["ambiguous"] = False

    vis = np.empty((T, spec.d_v))
    aud = np.empty((T, spec.d_a)) if spec.multimodal else None
    labels = np.zeros(T, dtype=np.uint8)
    for e in events:
        cat = "violent" if e["violent"] else "normal"
        pos = e["start"]
        for ph, n in zip(PHASES, e["lens"]):
            for _ in range(int(n)):
                if pos >= T:
                    break
                key = (cat, e["sub"], ph)
                borrow = e["ambiguous"] and ph == "action"
                vis[pos] = tax.ambiguous_action[e["sub"]] if borrow else tax.visual[key]
                if aud is not None:
                    aud[pos] = tax.ambiguous_audio[e["sub"]] if borrow else tax.audio[key]
                labels[pos] = 1 if e["violent"] else 0
                pos += 1
    vis += rng.normal(0.0, spec.noise, vis.shape) + rng.normal(0.0, 0.3 * spec.noise, (1, spec.d_v))
    if aud is not None:
        aud += rng.normal(0.0, spec.noise, aud.shape) + rng.normal(0.0, 0.3 * spec.noise, (1, spec.d_a))
        aud = aud.astype(np.float32)
    return FeatureSequence(vis.astype(np.float32), aud, labels, int(labels.any()), vid)


def synth_generate(spec):
    """Deterministic list of FeatureSequence for ``spec.seed``."""
    tax = make_taxonomy(spec)
    _, rng = _rngs(spec.seed)
    n_violent = int(round(spec.violent_fraction * spec.num_videos))
    flags = np.zeros(spec.num_videos, dtype=bool)
    flags[:n_violent] = True
    rng.shuffle(flags)
    return [_video(spec, tax, rng, bool(v), f"vid{i:04d}") for i, v in enumerate(flags)]
