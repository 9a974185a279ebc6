import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import hyperboloid_point, lorentz_inner as ref_inner
from dsrl import tensor_diff as td
from dsrl.errors import DegenerateDirectionError, DimensionError, GeometryError
from dsrl.hypernn import (
    HyperClassifierParams,
    HyperLinearParams,
    bounded_lift_t,
    distance_matrix_t,
    f_x_M,
    hyper_classifier,
    hyper_linear,
    lift_t,
    log_origin_t,
    squash_t,
)
from dsrl.manifold import geodesic_distance, lift_from_euclidean

small = st.floats(-2.0, 2.0, allow_nan=False)


def _on_sheet(Y, tol=1e-10):
    Y = np.atleast_2d(Y)
    scale = np.maximum(1.0, Y[:, 0] ** 2)
    return np.all(Y[:, 0] > 0) and np.all(np.abs(ref_inner(Y, Y) + 1.0) <= tol * scale)


def _sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


class TestLiftTensors:
    def test_lift_matches_scalar_oracle(self, rng):
        E = rng.normal(size=(6, 3))
        E[2] = 0.0
        got = lift_t(td.Tensor(E)).data
        np.testing.assert_allclose(got, [hyperboloid_point(e) for e in E], rtol=1e-14, atol=1e-15)

    def test_squash_radius(self, rng):
        E = rng.normal(0, 4, size=(10, 5))
        got = squash_t(td.Tensor(E), 2.0).data
        r = np.linalg.norm(E, axis=1)
        np.testing.assert_allclose(np.linalg.norm(got, axis=1), 2.0 * np.tanh(r / 2.0), rtol=1e-14)
        # direction preserved
        np.testing.assert_allclose(got / np.linalg.norm(got, axis=1)[:, None], E / r[:, None], rtol=1e-13)

    def test_bounded_lift_zero_radius_is_plain(self, rng):
        E = td.Tensor(rng.normal(size=(4, 3)))
        np.testing.assert_array_equal(bounded_lift_t(E, 0.0).data, lift_t(E).data)

    def test_bounded_lift_caps_time_coordinate(self, rng):
        E = td.Tensor(rng.normal(0, 50, size=(20, 4)))
        Y = bounded_lift_t(E, 2.0).data
        assert np.all(Y[:, 0] <= math.cosh(2.0) * (1 + 1e-15))
        assert _on_sheet(Y)

    def test_log_origin_inverts_lift(self, rng):
        E = rng.normal(size=(8, 3))
        np.testing.assert_allclose(log_origin_t(lift_t(td.Tensor(E))).data, E, atol=1e-12)


class TestDistanceMatrix:
    def test_matches_geodesic_distance(self, rng):
        X = lift_from_euclidean(rng.normal(size=(5, 3)))
        Y = lift_from_euclidean(rng.normal(size=(4, 3)))
        ref = np.array([[geodesic_distance(x, y) for y in Y] for x in X])
        np.testing.assert_allclose(distance_matrix_t(td.Tensor(X), td.Tensor(Y)).data, ref, rtol=1e-10, atol=1e-13)

    def test_self_distance_diagonal_is_zero(self, rng):
        X = lift_from_euclidean(rng.normal(size=(5, 3)))
        np.testing.assert_array_equal(np.diag(distance_matrix_t(td.Tensor(X), td.Tensor(X)).data), 0.0)

    def test_far_points(self):
        X = lift_from_euclidean(np.array([[20.0, 0.0], [-25.0, 0.0]]))
        D = distance_matrix_t(td.Tensor(X), td.Tensor(X)).data
        assert D[0, 1] == pytest.approx(45.0, rel=1e-12)

    def test_rejects_opposite_sheets(self):
        X = lift_from_euclidean(np.array([[0.5, 0.1]]))
        with pytest.raises(GeometryError):
            distance_matrix_t(td.Tensor(X), td.Tensor(-X))

    def test_gradient(self, rng):
        Y = lift_from_euclidean(rng.normal(size=(3, 2)))
        err = td.grad_check(lambda E: td.tsum(distance_matrix_t(lift_t(E), td.Tensor(Y))), [rng.normal(size=(4, 2))])
        assert err <= 1e-4


class TestFxM:
    def test_closed_form(self, rng):
        x = lift_from_euclidean(rng.normal(size=3))
        M = rng.normal(size=(3, 4))
        Wx = M[1:] @ x
        np.testing.assert_allclose(f_x_M(M, x), np.r_[math.sqrt(Wx @ Wx + 1.0), Wx], rtol=1e-13)

    @given(arrays(np.float64, (4, 4), elements=small), arrays(np.float64, 3, elements=small))
    def test_always_lands_on_sheet(self, M, e):
        x = lift_from_euclidean(e)
        if abs(M[0] @ x) < 1e-6:
            return
        assert _on_sheet(f_x_M(M, x), tol=1e-9)

    def test_changes_dimension(self, rng):
        x = lift_from_euclidean(rng.normal(size=4))
        y = f_x_M(rng.normal(size=(3, 5)), x)
        assert y.shape == (3,)
        assert _on_sheet(y)

    def test_first_row_only_needs_nonzero_product(self, rng):
        x = lift_from_euclidean(rng.normal(size=2))
        W = rng.normal(size=(2, 3))
        a = f_x_M(np.vstack([rng.normal(size=3), W]), x)
        b = f_x_M(np.vstack([rng.normal(size=3), W]), x)
        np.testing.assert_allclose(a, b, rtol=1e-13)

    def test_degenerate_first_row(self):
        x = np.array([1.0, 0.0, 0.0])
        with pytest.raises(DegenerateDirectionError):
            f_x_M(np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0]]), x)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            f_x_M(np.ones((2, 3)), np.ones(4))


def _params(rng, n, m, mode, scale=1.0):
    p = HyperLinearParams.init(n, m, rng, mode=mode, scale=scale)
    p.b.data[:] = rng.normal(size=m)
    p.b_prime.data[...] = 0.3
    return p


class TestHyperLinear:
    def test_dropout_mode_agrees_with_f_x_M(self, rng):
        p = _params(rng, 3, 2, "dropout")
        X = lift_from_euclidean(rng.normal(size=(5, 3)))
        out = hyper_linear(td.Tensor(X), p).data
        M = np.vstack([p.v.data, p.W.data])
        np.testing.assert_allclose(out, [f_x_M(M, x) for x in X], rtol=1e-13)

    def test_activation_norm_transcription(self, rng):
        p = _params(rng, 3, 4, "activation_norm", scale=1.7)
        X = lift_from_euclidean(rng.normal(size=(5, 3)))
        out = hyper_linear(td.Tensor(X), p).data
        for x, y in zip(X, out):
            u = p.W.data @ np.maximum(x, 0.0) + p.b.data
            gate = _sigmoid(float(p.v.data @ x) + 0.3)
            phi = 1.7 * gate * u / np.linalg.norm(u)
            np.testing.assert_allclose(y, np.r_[math.sqrt(phi @ phi + 1.0), phi], rtol=1e-13)

    @pytest.mark.parametrize("mode", ["dropout", "activation_norm"])
    def test_output_on_sheet(self, rng, mode):
        p = _params(rng, 6, 3, mode)
        X = lift_from_euclidean(rng.normal(0, 2, size=(30, 6)))
        assert _on_sheet(hyper_linear(td.Tensor(X), p, training=True, rng=rng, dropout_rate=0.5).data)

    def test_activation_norm_spatial_norm_is_gate(self, rng):
        p = _params(rng, 3, 5, "activation_norm", scale=2.0)
        X = lift_from_euclidean(rng.normal(size=(4, 3)))
        out = hyper_linear(td.Tensor(X), p).data
        gates = [2.0 * _sigmoid(float(p.v.data @ x) + 0.3) for x in X]
        np.testing.assert_allclose(np.linalg.norm(out[:, 1:], axis=1), gates, rtol=1e-13)

    def test_single_vector(self, rng):
        p = _params(rng, 3, 2, "activation_norm")
        x = lift_from_euclidean(rng.normal(size=3))
        single = hyper_linear(td.Tensor(x), p).data
        batch = hyper_linear(td.Tensor(x[None]), p).data
        np.testing.assert_array_equal(single, batch[0])

    def test_dropout_eval_is_deterministic(self, rng):
        p = _params(rng, 3, 2, "dropout")
        X = td.Tensor(lift_from_euclidean(rng.normal(size=(4, 3))))
        a = hyper_linear(X, p, training=False, rng=np.random.default_rng(1), dropout_rate=0.6).data
        b = hyper_linear(X, p).data
        np.testing.assert_array_equal(a, b)

    def test_wrong_width(self, rng):
        p = _params(rng, 3, 2, "dropout")
        with pytest.raises(DimensionError):
            hyper_linear(td.Tensor(np.ones((2, 3))), p)

    def test_param_validation(self, rng):
        p = _params(rng, 3, 2, "dropout")
        with pytest.raises(ValueError):
            HyperLinearParams(p.W, p.v, p.b, p.b_prime, mode="bogus")
        with pytest.raises(ValueError):
            HyperLinearParams(p.W, p.v, p.b, p.b_prime, scale=0.0)
        with pytest.raises(DimensionError):
            HyperLinearParams(p.W, td.parameter(np.ones(2)), p.b, p.b_prime)

    @pytest.mark.parametrize("mode", ["dropout", "activation_norm"])
    def test_gradients(self, rng, mode):
        p = _params(rng, 3, 2, mode)
        X = lift_from_euclidean(rng.normal(size=(4, 3)))
        w = rng.normal(size=(4, 3))

        def f(W, v, b):
            q = HyperLinearParams(td.as_tensor(W), td.as_tensor(v), td.as_tensor(b), p.b_prime, mode=mode)
            return td.tsum(hyper_linear(td.Tensor(X), q) * w)

        assert td.grad_check(f, [p.W.data, p.v.data, p.b.data]) <= 1e-4


class TestClassifier:
    def test_transcription(self, rng):
        p = HyperClassifierParams.init(3, rng, eps=0.7)
        p.b.data[...] = 0.2
        F = lift_from_euclidean(rng.normal(size=(6, 3)))
        got = hyper_classifier(td.Tensor(F), p).data
        ref = [_sigmoid(0.7 + 0.7 * ref_inner(f, p.W.data) + 0.2) for f in F]
        np.testing.assert_allclose(got, ref, rtol=1e-14)

    def test_per_snippet_under_reordering(self, rng):
        p = HyperClassifierParams.init(3, rng)
        F = lift_from_euclidean(rng.normal(size=(7, 3)))
        perm = rng.permutation(7)
        s = hyper_classifier(td.Tensor(F), p).data
        np.testing.assert_array_equal(hyper_classifier(td.Tensor(F[perm]), p).data, s[perm])

    def test_init_bias_cancels_eps(self, rng):
        p = HyperClassifierParams.init(4, rng, eps=1.0)
        assert float(p.b.data) == -1.0

    def test_scores_in_unit_interval(self, rng):
        p = HyperClassifierParams.init(3, rng)
        F = lift_from_euclidean(rng.normal(0, 3, size=(50, 3)))
        s = hyper_classifier(td.Tensor(F), p).data
        assert np.all((s >= 0) & (s <= 1))

    def test_single_point(self, rng):
        p = HyperClassifierParams.init(2, rng)
        f = lift_from_euclidean(rng.normal(size=2))
        assert hyper_classifier(td.Tensor(f), p).shape == ()

    def test_validation(self, rng):
        p = HyperClassifierParams.init(3, rng)
        with pytest.raises(ValueError):
            HyperClassifierParams(p.W, p.b, eps=0.0)
        with pytest.raises(DimensionError):
            hyper_classifier(td.Tensor(np.ones((2, 3))), p)
