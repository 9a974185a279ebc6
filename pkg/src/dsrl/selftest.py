"""Built-in self-test suites run by ``dsrl selftest``.

Each suite returns a SuiteResult with the number of checks, the worst error
seen and the names of failed checks. ``faults`` names components to perturb
on purpose so that the report can be shown to catch them; the only fault
currently wired is ``"exp_map"``.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import manifold, tensor_diff as td
from .data_eval.metrics import average_precision, roc_auc
from .graphs import hyperbolic_aggregate, hyperbolic_dirichlet_energy, lshad, semantic_adjacency
from .hypernn import HyperLinearParams, f_x_M, hyper_linear

FAULTS = ("exp_map",)
MEMBERSHIP_TOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    worst: float = 0.0
    tolerance: float = 0.0
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self):
        return not self.failures

    def record(self, check, err, tol=None):
        tol = self.tolerance if tol is None else tol
        self.checks += 1
        err = float(err)
        if not math.isfinite(err) or err > self.worst:
            self.worst = err if math.isfinite(err) else math.inf
        if not err <= tol and check not in self.failures:
            self.failures.append(check)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f" failed: {', '.join(self.failures)}" if self.failures else ""
        return f"[{status}] {self.name:<16} checks={self.checks:<6} worst={self.worst:.3e} tol={self.tolerance:.0e} ({self.seconds:.2f}s){extra}"


def _exp_map(faults):
    if "exp_map" not in faults:
        return manifold.exp_map

    def perturbed(x, v, cfg=None):
        y = manifold.exp_map(x, v, cfg)
        return y * (1.0 + 1e-6)

    return perturbed


def _membership_error(P):
    P = np.atleast_2d(P)
    res = np.abs(manifold.lorentz_inner(P, P) + 1.0)
    # a point on the lower sheet is reported as an infinite error
    res = np.where(P[:, 0] > 0, res, np.inf)
    return float(np.max(res))


def _random_tangent(rng, x, max_norm):
    n = x.shape[-1] - 1
    u = manifold.project_to_tangent(x, np.r_[0.0, rng.normal(size=n)])
    nu = manifold.lorentz_norm(u)
    return u / nu * rng.uniform(0, max_norm) if nu > 0 else u


def suite_membership(draws=10_000, seed=0, faults=()):
    """lift, exp_map, hyper_linear (both modes) and aggregation stay on the hyperboloid.

    Every family is checked on ``draws`` output points.
    """
    r = SuiteResult("membership", tolerance=MEMBERSHIP_TOL)
    rng = np.random.default_rng(seed)
    exp_map = _exp_map(faults)
    n = 8
    E = rng.normal(0, 1.0, (draws, n))
    lifted = manifold.lift_from_euclidean(E)
    r.record("lift_from_euclidean", _membership_error(lifted))
    for x in lifted:
        v = _random_tangent(rng, x, 2.0)
        r.record("exp_map", _membership_error(exp_map(x, v)))
    for mode in ("dropout", "activation_norm"):
        p = HyperLinearParams.init(n, 6, rng, mode=mode)
        p.b.data = rng.normal(size=6)
        with td.no_grad():
            out = hyper_linear(lifted, p, training=True, rng=rng, dropout_rate=0.3).data
        r.record(f"hyper_linear[{mode}]", _membership_error(out))
    for _ in range(-(-draws // 32)):
        X = lifted[rng.choice(draws, 32, replace=False)]
        Y = hyperbolic_aggregate(semantic_adjacency(X), X)
        r.record("hyperbolic_aggregate", _membership_error(Y))
    return r


def suite_matrix_map(draws=2_000, seed=1):
    """f_x(M) x = [sqrt(|Wx|^2 + 1), Wx] and lies on the manifold for random M, x."""
    r = SuiteResult("matrix_map", tolerance=MEMBERSHIP_TOL)
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        n, m = rng.integers(1, 10, size=2)
        x = manifold.lift_from_euclidean(rng.normal(0, 1.5, n))
        M = rng.normal(size=(m + 1, n + 1))
        if abs(M[0] @ x) < 1e-8:
            continue
        y = f_x_M(M, x)
        Wx = M[1:] @ x
        expected = np.r_[np.sqrt(Wx @ Wx + 1.0), Wx]
        r.record("membership", _membership_error(y) / max(1.0, y[0] ** 2))
        r.record("closed_form", np.max(np.abs(y - expected)) / max(1.0, np.max(np.abs(expected))))
    return r


def suite_roundtrip(draws=1_000, seed=2, faults=()):
    """log(x, exp(x, v)) recovers v for |v|_L <= 5."""
    r = SuiteResult("exp_log", tolerance=1e-8)
    rng = np.random.default_rng(seed)
    exp_map = _exp_map(faults)
    for _ in range(draws):
        x = manifold.lift_from_euclidean(rng.normal(0, 1.0, 5))
        v = _random_tangent(rng, x, 5.0)
        back = manifold.log_map(x, exp_map(x, v))
        r.record("roundtrip", np.max(np.abs(back - v)))
    return r


def suite_energy(sets=100, seed=3):
    """Aggregation over the semantic graph does not raise the Dirichlet energy (monitored, >= 95%)."""
    r = SuiteResult("energy", tolerance=0.05)
    violations = 0
    worst_gap = 0.0
    for s in range(sets):
        rng = np.random.default_rng([seed, s])
        centres = rng.normal(0, 1.0, (4, 8))
        E = centres[rng.integers(4, size=32)] + rng.normal(0, 0.3, (32, 8))
        X = manifold.lift_from_euclidean(E)
        Y = hyperbolic_aggregate(semantic_adjacency(X), X)
        gap = hyperbolic_dirichlet_energy(Y) - hyperbolic_dirichlet_energy(X)
        worst_gap = max(worst_gap, gap)
        violations += gap > 1e-9
    r.checks = sets
    r.worst = violations / sets
    if r.worst > r.tolerance:
        r.failures.append(f"violation_rate (worst gap {worst_gap:.3e})")
    return r


def suite_lshad(grid=100):
    """Closed-form endpoints and strict monotonicity in k and in -E."""
    r = SuiteResult("lshad", tolerance=1e-12)
    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    r.record("lshad(0,1)", abs(lshad(0.0, 1) - sig(0.6)))
    r.record("lshad(inf,1)", abs(lshad(math.inf, 1) - sig(-0.4)))
    # k runs over real values in [1, 4]: for integer k near 100 the sigmoid
    # rounds to 1.0 in double precision and strict order is unobservable
    Es = np.linspace(0.0, 50.0, grid)
    ks = np.linspace(1.0, 4.0, grid)
    V = np.array([[lshad(E, k) for E in Es] for k in ks])
    bad_k = np.sum(np.diff(V, axis=0) <= 0)
    bad_E = np.sum(np.diff(V, axis=1) >= 0)
    r.record("monotone_in_k", float(bad_k), 0)
    r.record("monotone_in_minus_E", float(bad_E), 0)
    return r


def _gc_layers(rng):
    """One scalar-valued probe per layer, each a function of a T=3 input."""
    from .dsi import DsiParams, dual_space_fuse
    from .graphs import (
        euclid_cosine_adjacency_t,
        gcn_layer,
        he_gcn_layer,
        hyperbolic_aggregate_t,
        semantic_adjacency_t,
        temporal_adjacency,
        temporal_hgcn_layer,
    )
    from .hypernn import HyperClassifierParams, hyper_classifier, lift_t, log_origin_t

    T, d = 3, 4
    E = rng.normal(0, 0.5, (T, d))
    w_out = rng.normal(size=(T, d))
    cases = {}
    for mode in ("activation_norm", "dropout"):
        p = HyperLinearParams.init(d, 3, rng, mode=mode)
        p.b.data = rng.normal(size=3)
        w = rng.normal(size=3)
        cases[f"hyper_linear[{mode}]"] = (lambda E_, p=p, w=w: td.tsum(hyper_linear(lift_t(E_), p)[:, 1:] * w), [E])

    def agg(E_):
        X = lift_t(E_)
        A, _ = semantic_adjacency_t(X)
        return td.tsum(log_origin_t(hyperbolic_aggregate_t(A, X)) * w_out)

    p_he = HyperLinearParams.init(d, d, rng)
    p_tmp = HyperLinearParams.init(d, d, rng)
    A_t = temporal_adjacency(T).A
    W_gcn = rng.normal(size=(d, 2))
    dsi = DsiParams.init(d, rng, lift_radius=2.0)
    H = manifold.lift_from_euclidean(rng.normal(0, 0.5, (T, d)))
    cls = HyperClassifierParams.init(d, rng)
    cls.b.data = np.array(0.3)

    cases["aggregate"] = (agg, [E])
    cases["he_gcn"] = (lambda E_: td.tsum(log_origin_t(he_gcn_layer(lift_t(E_), 1, p_he)[0]) * w_out), [E])
    cases["temporal_hgcn"] = (lambda E_: td.tsum(log_origin_t(temporal_hgcn_layer(lift_t(E_), p_tmp, A_t)) * w_out), [E])
    cases["euclid_gcn"] = (lambda E_: td.tsum(gcn_layer(E_, euclid_cosine_adjacency_t(E_), W_gcn)), [E + 1.0])
    cases["dsi"] = (lambda E_: td.tsum(dual_space_fuse(E_, H, dsi).V_F * w_out), [E])
    cases["classifier"] = (lambda E_: td.tsum(hyper_classifier(lift_t(E_), cls)), [E])
    return cases


def suite_gradcheck(seed=4):
    """Finite-difference checks on layers and on the full forward pass at T=3, d=8."""
    from .data_eval.featurefile import FeatureSequence
    from .pipeline.model import Model, ModelConfig, snippet_scores_t

    r = SuiteResult("gradcheck", tolerance=1e-4)
    rng = np.random.default_rng(seed)
    for name, (f, inputs) in _gc_layers(rng).items():
        r.record(name, td.grad_check(f, inputs))
    cfg = ModelConfig(d=8, d_v=5, d_a=3, dropout=0.0, seed=seed)
    model = Model(cfg)
    fs = FeatureSequence(rng.normal(size=(3, 5)).astype(np.float32), rng.normal(size=(3, 3)).astype(np.float32),
                         np.array([0, 1, 0], np.uint8), 1, "gc")
    name = "pre.proj"
    base = {k: t.data.copy() for k, t in model.params.items()}

    def end_to_end(W):
        model.params[name] = W
        model._bind()
        return td.mean(snippet_scores_t(fs, model))

    worst = td.grad_check(end_to_end, [base[name]])
    model.params[name] = td.parameter(base[name], name=name)
    model._bind()
    r.record("end_to_end", worst, 1e-3)
    return r


def _ap_bruteforce(scores, labels):
    total = 0.0
    for t in np.unique(scores):
        sel = scores >= t
        tp = np.sum(labels[sel])
        # recall step contributed by the positives that sit exactly at t
        step = np.sum(labels[scores == t]) / labels.sum()
        total += step * tp / sel.sum()
    return total


def suite_metrics(seed=5):
    r = SuiteResult("metrics", tolerance=1e-12)
    rng = np.random.default_rng(seed)
    s = np.array([0.9, 0.8, 0.7, 0.6])
    y = np.array([1, 0, 1, 0])
    r.record("ap_worked_example", abs(average_precision(s, y) - 5 / 6))
    r.record("auc_worked_example", abs(roc_auc(s, y) - 0.75))
    for bits in itertools.product((0, 1), repeat=8):
        y = np.array(bits)
        if not y.any():
            continue
        s = rng.integers(0, 4, 8) / 4.0
        r.record("ap_bruteforce", abs(average_precision(s, y) - _ap_bruteforce(s, y)))
        if 0 < y.sum() < 8:
            pos, neg = s[y == 1], s[y == 0]
            pairs = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
            r.record("auc_pairs", abs(roc_auc(s, y) - pairs / (pos.size * neg.size)))
    return r


SUITES = ("membership", "matrix_map", "exp_log", "energy", "lshad", "gradcheck", "metrics")


def run_selftest(faults=(), quick=False):
    """Run every suite and return the list of SuiteResult."""
    faults = tuple(faults)
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown fault(s) {sorted(unknown)}; known: {FAULTS}")
    scale = 10 if quick else 1
    runners = [
        lambda: suite_membership(10_000 // scale, faults=faults),
        lambda: suite_matrix_map(2_000 // scale),
        lambda: suite_roundtrip(1_000 // scale, faults=faults),
        lambda: suite_energy(100 // scale if quick else 100),
        suite_lshad,
        suite_gradcheck,
        suite_metrics,
    ]
    results = []
    for run in runners:
        t0 = time.perf_counter()
        res = run()
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results


def format_report(results):
    lines = [res.line() for res in results]
    n_fail = sum(not res.passed for res in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} suites passed")
    return "\n".join(lines)
