import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ordinal_rm.gradcheck import numeric_grad
from ordinal_rm.thresholds import (DimensionError, LevelError, Mode, ThresholdParams, Thresholds,
                                   backprop_thresholds, build_thresholds, default_params, interval_of,
                                   params_from_zeta, pava, predict_level, project_thresholds, project_zeta)

from oracles import project_active_sets


def th(*zeta, mode=Mode.ASYMMETRIC):
    return Thresholds(len(zeta) // 2, mode, np.array(zeta, dtype=float))


class TestBuild:
    def test_symmetric_k2_zero_alpha(self):
        out = build_thresholds(ThresholdParams("symmetric", [0.0, 0.0]))
        np.testing.assert_array_equal(out.zeta, [-2, -1, 1, 2])

    def test_asymmetric_k1(self):
        out = build_thresholds(ThresholdParams("asymmetric", [-1.5, math.log(3)]))
        np.testing.assert_allclose(out.zeta, [-1.5, 1.5], rtol=0, atol=1e-15)

    def test_symmetric_k3_recurrence(self):
        alpha = [math.log(0.5), math.log(0.5), math.log(1.0)]
        out = build_thresholds(ThresholdParams("symmetric", alpha))
        np.testing.assert_allclose(out.zeta, [-2, -1, -0.5, 0.5, 1, 2], atol=1e-15)

    def test_k_mismatch(self):
        with pytest.raises(DimensionError):
            build_thresholds(ThresholdParams("symmetric", [0.0, 0.0]), K=3)

    def test_odd_asymmetric_alpha_rejected(self):
        with pytest.raises(DimensionError):
            build_thresholds(ThresholdParams("asymmetric", [0.0, 0.0, 0.0]))

    @settings(max_examples=200, deadline=None)
    @given(st.sampled_from(list(Mode)), st.integers(1, 5), st.integers(0, 2**31))
    def test_always_valid(self, mode, K, seed):
        rng = np.random.default_rng(seed)
        n = K if mode is Mode.SYMMETRIC else 2 * K
        out = build_thresholds(ThresholdParams(mode, rng.normal(0, 1.5, n)))
        assert np.all(np.diff(out.zeta) > 0)
        if mode is Mode.SYMMETRIC:
            assert np.all(out.zeta + out.zeta[::-1] == 0)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_params_round_trip(self, mode):
        p = default_params(3, mode)
        np.testing.assert_allclose(build_thresholds(p).zeta, np.linspace(-1.5, 1.5, 6), atol=1e-14)
        again = params_from_zeta(build_thresholds(p).zeta, mode)
        np.testing.assert_allclose(again.alpha, p.alpha, atol=1e-14)


class TestBackprop:
    def test_asymmetric_k1_ones(self):
        alpha = np.array([0.3, -0.7])
        g = backprop_thresholds(ThresholdParams("asymmetric", alpha), [1.0, 1.0])
        np.testing.assert_allclose(g, [2.0, math.exp(-0.7)], rtol=1e-15)

    def test_symmetric_k1_cancels(self):
        g = backprop_thresholds(ThresholdParams("symmetric", [0.4]), [1.0, 1.0])
        np.testing.assert_array_equal(g, [0.0])

    def test_symmetric_k2_fd(self):
        p = ThresholdParams("symmetric", np.zeros(2))
        analytic = backprop_thresholds(p, [0, 0, 0, 1.0])
        numeric = numeric_grad(lambda a: build_thresholds(ThresholdParams("symmetric", a)).zeta[3], p.alpha)
        np.testing.assert_allclose(analytic, [1.0, 1.0], rtol=1e-15)
        np.testing.assert_allclose(numeric, analytic, rtol=1e-8)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_random_smooth_functional(self, mode):
        rng = np.random.default_rng(4)
        for _ in range(100):
            K = int(rng.integers(1, 6))
            alpha = rng.normal(0, 0.5, K if mode is Mode.SYMMETRIC else 2 * K)
            w = rng.normal(size=2 * K)

            def f(a):
                return float(w @ np.tanh(build_thresholds(ThresholdParams(mode, a)).zeta))

            zeta = build_thresholds(ThresholdParams(mode, alpha)).zeta
            analytic = backprop_thresholds(ThresholdParams(mode, alpha), w * (1 - np.tanh(zeta) ** 2))
            numeric = numeric_grad(f, alpha)
            assert np.linalg.norm(analytic - numeric) <= 1e-5 * max(np.linalg.norm(analytic), 1e-8)

    def test_wrong_grad_length(self):
        with pytest.raises(DimensionError):
            backprop_thresholds(ThresholdParams("symmetric", [0.0, 0.0]), [1.0, 1.0])


class TestThresholds:
    def test_rejects_unordered(self):
        with pytest.raises(ValueError):
            th(0.0, 0.0)
        with pytest.raises(DimensionError):
            Thresholds(2, Mode.ASYMMETRIC, np.array([0.0, 1.0]))

    def test_signed_index(self):
        t = th(-2, -1, 1, 2)
        assert (t.signed(-2), t.signed(-1), t.signed(1), t.signed(2)) == (-2, -1, 1, 2)
        with pytest.raises(LevelError):
            t.signed(0)

    def test_zeta_read_only(self):
        t = th(-1, 1)
        with pytest.raises(ValueError):
            t.zeta[0] = 5.0

    def test_dict_round_trip(self):
        t = th(-1.2, 0.1, 0.3, 2.5)
        assert Thresholds.from_dict(t.to_dict()) == t


class TestIntervals:
    def test_zero_level(self):
        assert interval_of(0, th(-2, -1, 1, 2)) == (-1, 1)

    def test_top_level(self):
        assert interval_of(2, th(-2, -1, 1, 2)) == (2, math.inf)
        assert interval_of(-2, th(-2, -1, 1, 2)) == (-math.inf, -2)

    def test_rank_enumeration(self):
        assert interval_of(-1, th(-2, -1, 1, 2)) == (-2, -1)

    def test_out_of_range(self):
        with pytest.raises(LevelError):
            interval_of(3, th(-2, -1, 1, 2))

    def test_predict(self):
        assert predict_level(0.5, th(-1, 1)) == 0
        assert predict_level(10.0, th(-2, -1, 1, 2)) == 2
        assert predict_level(-1.0, th(-2, -1, 1, 2)) == 0

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-20, 20), st.integers(1, 5), st.integers(0, 2**31))
    def test_partition(self, s, K, seed):
        rng = np.random.default_rng(seed)
        t = build_thresholds(ThresholdParams(Mode.ASYMMETRIC, rng.normal(0, 1, 2 * K)))
        hits = []
        for z in range(-K, K + 1):
            lo, hi = interval_of(z, t)
            if lo <= s < hi:
                hits.append(z)
        assert hits == [predict_level(s, t)]


class TestProjection:
    def test_feasible_unchanged(self):
        raw = np.array([-1.0, 0.0, 0.5, 3.0])
        np.testing.assert_array_equal(project_zeta(raw, 0.1), raw)

    def test_two_point(self):
        # grid oracle for min (x1-1)^2 + x2^2 s.t. x2 >= x1 + 0.1
        g = np.linspace(-1, 2, 3001)
        X1, X2 = np.meshgrid(g, g, indexing="ij")
        obj = np.where(X2 >= X1 + 0.1 - 1e-12, (X1 - 1) ** 2 + X2**2, np.inf)
        i, j = np.unravel_index(np.argmin(obj), obj.shape)
        out = project_zeta([1.0, 0.0], 0.1)
        np.testing.assert_allclose(out, [0.45, 0.55], atol=1e-12)
        np.testing.assert_allclose(out, [g[i], g[j]], atol=1e-3)

    def test_pooled_zeros(self):
        np.testing.assert_allclose(project_zeta([0.0, 0.0, 0.0], 1.0), [-1, 0, 1], atol=1e-15)

    def test_pava_matches_sklearn(self):
        from sklearn.isotonic import IsotonicRegression
        rng = np.random.default_rng(0)
        for _ in range(50):
            y = rng.normal(size=int(rng.integers(1, 20)))
            ref = IsotonicRegression().fit_transform(np.arange(y.size), y)
            np.testing.assert_allclose(pava(y), ref, atol=1e-12)

    def test_against_active_set_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            raw = rng.normal(0, 1, n)
            eps = float(rng.uniform(0.01, 0.5))
            np.testing.assert_allclose(project_zeta(raw, eps), project_active_sets(raw, eps), atol=1e-9)

    def test_idempotent_exact(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            raw = rng.normal(0, 2, 2 * int(rng.integers(1, 4)))
            once = project_thresholds(raw, 0.05).zeta
            np.testing.assert_array_equal(project_thresholds(once, 0.05).zeta, once)

    def test_symmetric_mode(self):
        out = project_thresholds([-0.1, 0.3, 0.1, 0.2], 0.1, Mode.SYMMETRIC)
        np.testing.assert_array_equal(out.zeta, -out.zeta[::-1])
        assert np.all(np.diff(out.zeta) >= 0.1 - 1e-12)

    def test_beats_random_feasible_points(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            n, eps = 4, 0.2
            raw = rng.normal(0, 1, n)
            p = project_zeta(raw, eps)
            start = rng.normal(0, 1.5, (10_000, 1))
            gaps = eps + rng.exponential(0.5, (10_000, n - 1))
            pts = np.concatenate([start, start + np.cumsum(gaps, axis=1)], axis=1)
            assert np.sum((p - raw) ** 2) <= np.min(np.sum((pts - raw) ** 2, axis=1)) + 1e-12

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            project_zeta([0.0, 1.0], 0.0)
