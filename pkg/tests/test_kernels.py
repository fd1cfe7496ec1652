import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gmtlab.kernels import (
    KernelSpec,
    apply_T,
    apply_T_fast,
    bilinear_pairing,
    eval_kernel,
    eval_kernel_regularized,
    operator_norm,
    power_iteration_norm,
    reflectionless_defect,
    regularized_values,
    weighted_matrix,
)
from gmtlab.measure import DiscreteMeasure
from gmtlab.zoo import cantor_measure, plane_measure

from strategies import measures

E1 = np.array([1.0, 0.0])


def kernels():
    return [
        KernelSpec.riesz(1, 0.5),
        KernelSpec.riesz(2, 1.0),
        KernelSpec.riesz(2, 1.5, alpha=0.5),
        KernelSpec.riesz(3, 2.0),
        KernelSpec.planar_conjugate(),
    ]


def two_atoms():
    return DiscreteMeasure([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0])


class TestKernelSpec:
    def test_rejects_bad_s(self):
        with pytest.raises(ValueError):
            KernelSpec.riesz(2, 2.0)

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            KernelSpec.riesz(2, 1.0, alpha=1.5)

    def test_riesz_value(self):
        assert np.allclose(eval_kernel(KernelSpec.riesz(2, 1.0), [3, 4]), [0.12, 0.16], atol=1e-17)

    def test_planar_at_i(self):
        assert np.allclose(eval_kernel(KernelSpec.planar_conjugate(), [0, 1]), [0, 1], atol=1e-16)

    def test_planar_matches_complex(self, rng):
        K = KernelSpec.planar_conjugate()
        for z in rng.normal(size=(50, 2)):
            c = complex(*z)
            w = c.conjugate() / c ** 2
            assert np.allclose(eval_kernel(K, z), [w.real, w.imag], rtol=1e-13)

    def test_origin_undefined(self):
        with pytest.raises(ValueError):
            eval_kernel(KernelSpec.riesz(2, 1.0), [0, 0])

    def test_custom_kernel(self):
        K = KernelSpec.custom(2, 1.0, lambda x: x / np.sum(x * x, axis=1, keepdims=True), 2)
        assert np.allclose(eval_kernel(K, [3, 4]), eval_kernel(KernelSpec.riesz(2, 1.0), [3, 4]))


class TestKernelInvariants:
    @pytest.mark.parametrize("K", kernels(), ids=lambda k: f"{k.variant}-{k.dim}-{k.s}")
    def test_antisymmetry_homogeneity_size(self, K):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2000, K.dim))
        lam = rng.uniform(0.01, 100, size=2000)
        from gmtlab.kernels import kernel_values

        v = kernel_values(K, x)
        assert np.max(np.abs(kernel_values(K, -x) + v)) <= 1e-14 * np.max(np.abs(v))
        scaled = kernel_values(K, lam[:, None] * x)
        expect = lam[:, None] ** (-K.s) * v
        assert np.allclose(scaled, expect, rtol=1e-12, atol=0)
        r = np.linalg.norm(x, axis=1)
        assert np.all(np.linalg.norm(v, axis=1) <= r ** (-K.s) * (1 + 1e-13))

    @pytest.mark.parametrize("K", kernels(), ids=lambda k: f"{k.variant}-{k.dim}-{k.s}")
    def test_regularized_bound(self, K):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(100_000, K.dim)) * rng.uniform(1e-3, 3, size=(100_000, 1))
        for delta in (0.01, 0.3, 2.0):
            v = regularized_values(K, delta, x)
            assert np.all(np.linalg.norm(v, axis=1) <= delta ** (-K.s) * (1 + 1e-12))

    def test_regularized_examples(self):
        K = KernelSpec.riesz(1, 0.5)
        assert eval_kernel_regularized(K, 1.0, [0.5])[0] == pytest.approx(0.5, rel=1e-15)
        assert np.all(eval_kernel_regularized(K, 1.0, [0.0]) == 0)
        K2 = KernelSpec.riesz(2, 1.0)
        assert np.array_equal(eval_kernel_regularized(K2, 1.0, [3, 4]), eval_kernel(K2, [3, 4]))

    @given(st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(0.05, 5))
    def test_monotone_in_delta(self, d1, d2, r):
        lo, hi = sorted((d1, d2))
        for K in kernels():
            x = np.zeros(K.dim)
            x[0] = r
            a = np.linalg.norm(eval_kernel_regularized(K, lo, x))
            b = np.linalg.norm(eval_kernel_regularized(K, hi, x))
            assert b <= a * (1 + 1e-14)


class TestApplyT:
    def test_single_atom(self):
        mu = DiscreteMeasure([[0.3, 0.2]], [2.0])
        assert np.all(apply_T(mu, KernelSpec.riesz(2, 1.0), 0.1, [1.0]).values == 0)

    def test_two_atoms(self):
        v = apply_T(two_atoms(), KernelSpec.riesz(2, 1.0), 0.5, [1.0, 1.0]).values
        assert np.array_equal(v, [-E1, E1])

    def test_zero_input(self):
        mu = cantor_measure(2, 0.25, 3)
        assert np.all(apply_T(mu, KernelSpec.riesz(2, 1.0), 0.01, np.zeros(len(mu))).values == 0)

    @given(measures(dim=2, min_size=2, max_size=40), st.floats(1e-3, 1.0))
    def test_linearity(self, mu, delta):
        rng = np.random.default_rng(len(mu))
        f, g = rng.normal(size=(2, len(mu)))
        K = KernelSpec.riesz(2, 1.0)
        lhs = apply_T(mu, K, delta, f + g).values
        rhs = apply_T(mu, K, delta, f).values + apply_T(mu, K, delta, g).values
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.max(np.abs(lhs)))


class TestTreeCode:
    def test_two_points_bit_identical(self):
        K = KernelSpec.riesz(2, 1.0)
        f = np.array([0.3, -1.2])
        assert np.array_equal(apply_T_fast(two_atoms(), K, 0.1, f).values,
                              apply_T(two_atoms(), K, 0.1, f).values)

    @pytest.mark.parametrize("K", [KernelSpec.riesz(2, 1.0), KernelSpec.planar_conjugate()],
                             ids=["riesz", "planar"])
    def test_within_declared_bound(self, K):
        mu = cantor_measure(2, 0.25, 5)
        f = np.random.default_rng(1).normal(size=len(mu))
        delta = 0.5 * mu.min_spacing()
        fast = apply_T_fast(mu, K, delta, f, theta=0.3, leaf_size=16)
        direct = apply_T(mu, K, delta, f).values
        assert fast.accuracy == "tree"
        err = np.linalg.norm(fast.values - direct, axis=1)
        assert np.all(err <= fast.error_bound)

    def test_small_theta_recovers_direct(self):
        mu = cantor_measure(2, 0.25, 4)
        K = KernelSpec.riesz(2, 1.0)
        f = np.random.default_rng(2).normal(size=len(mu))
        direct = apply_T(mu, K, 1e-3, f).values
        fast = apply_T_fast(mu, K, 1e-3, f, theta=0.02, leaf_size=8).values
        assert np.max(np.abs(fast - direct)) <= 1e-12 * np.max(np.abs(direct))

    def test_bad_theta(self):
        with pytest.raises(ValueError):
            apply_T_fast(two_atoms(), KernelSpec.riesz(2, 1.0), 0.1, [1, 1], theta=1.0)


class TestOperatorNorm:
    def test_single_atom(self):
        mu = DiscreteMeasure([[0.0, 0.0]], [1.0])
        rep = operator_norm(mu, KernelSpec.riesz(2, 1.0), [0.1, 1.0, 10.0])
        assert rep.sup == 0.0

    @pytest.mark.parametrize("K", [KernelSpec.riesz(2, 1.0), KernelSpec.planar_conjugate(),
                                   KernelSpec.riesz(3, 1.5)], ids=["riesz2", "planar", "riesz3"])
    def test_matches_dense_svd(self, K):
        rng = np.random.default_rng(5)
        mu = DiscreteMeasure(rng.uniform(-1, 1, (300, K.dim)), rng.uniform(0.1, 1, 300))
        for delta in (0.5 * mu.min_spacing(), 0.1, 1.0):
            est = power_iteration_norm(mu, K, delta)
            svd = np.linalg.norm(weighted_matrix(mu, K, delta), 2)
            assert est.norm == pytest.approx(svd, rel=1e-6)

    def test_rescaling_invariance(self):
        mu = cantor_measure(2, 0.25, 3)
        K = KernelSpec.riesz(2, 1.0)
        lam = 3.7
        for delta in (0.01, 0.1):
            a = power_iteration_norm(mu, K, delta, tol=1e-13).norm
            b = power_iteration_norm(mu.scaled(lam, K.s), K, delta * lam, tol=1e-13).norm
            assert b == pytest.approx(a, rel=1e-10)

    def test_rotation_invariance(self):
        mu = cantor_measure(2, 0.25, 3)
        K = KernelSpec.riesz(2, 1.0)
        t = 0.83
        R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        a = power_iteration_norm(mu, K, 0.05, tol=1e-13).norm
        b = power_iteration_norm(mu.transformed(R, [2.0, -1.0]), K, 0.05, tol=1e-13).norm
        assert b == pytest.approx(a, rel=1e-10)

    def test_sup_over_grid(self):
        mu = cantor_measure(2, 0.25, 2)
        rep = operator_norm(mu, KernelSpec.riesz(2, 1.0))
        assert rep.sup == max(e.norm for e in rep.estimates)
        assert len(rep.estimates) >= 2


class TestPairing:
    def test_phi_equals_f(self, rng):
        mu = cantor_measure(2, 0.25, 3)
        f = rng.normal(size=len(mu))
        assert np.all(bilinear_pairing(mu, KernelSpec.riesz(2, 1.0), f, f) == 0)

    @given(measures(dim=2, min_size=2, max_size=30))
    def test_swap_antisymmetry(self, mu):
        rng = np.random.default_rng(len(mu))
        f, phi = rng.normal(size=(2, len(mu)))
        K = KernelSpec.riesz(2, 1.0)
        assert np.array_equal(bilinear_pairing(mu, K, f, phi), -bilinear_pairing(mu, K, phi, f))

    def test_two_atoms(self):
        v = bilinear_pairing(two_atoms(), KernelSpec.riesz(2, 1.0), [1.0, 0.0], [1.0, 1.0])
        assert np.array_equal(v, E1)

    @given(measures(dim=2, min_size=2, max_size=30))
    def test_matches_transform(self, mu):
        f = np.random.default_rng(len(mu)).normal(size=len(mu))
        K = KernelSpec.riesz(2, 1.0)
        one = np.ones(len(mu))
        direct = bilinear_pairing(mu, K, f, one)
        T = apply_T(mu, K, 0.5 * mu.min_spacing(), f).values
        via_T = (mu.weights * one) @ T
        scale = np.sum(np.abs(f) * mu.weights) * np.max(np.linalg.norm(T, axis=1)) + 1e-300
        assert np.allclose(direct, via_T, atol=1e-12 * max(scale, 1.0))


class TestDefect:
    def test_zero_function(self):
        mu = two_atoms()
        assert reflectionless_defect(mu, KernelSpec.riesz(2, 1.0), [np.zeros(2)]).defect == 0.0

    def test_empty_dictionary(self):
        with pytest.raises(ValueError):
            reflectionless_defect(two_atoms(), KernelSpec.riesz(2, 1.0), [])

    def test_nonzero_mean_rejected(self):
        with pytest.raises(ValueError):
            reflectionless_defect(two_atoms(), KernelSpec.riesz(2, 1.0), [np.ones(2)])

    def test_two_atoms_odd_function(self):
        rep = reflectionless_defect(two_atoms(), KernelSpec.riesz(2, 1.0), [np.array([-0.5, 0.5])])
        assert rep.defect == pytest.approx(1.0)

    def test_plane_defect_is_truncation_dominated(self):
        # a finite window of side L leaves a 1/L end effect; the grid spacing adds only O(h)
        from gmtlab.oscillation import symmetric_dictionary

        K = KernelSpec.riesz(2, 1.0)
        dic = symmetric_dictionary(2, n=8, seed=0)
        by_L = [reflectionless_defect(plane_measure(2, 1, 1 / 32, L), K, dic).defect for L in (8.0, 16.0, 32.0)]
        for a, b in zip(by_L, by_L[1:]):
            assert 0.45 <= b / a <= 0.55
        by_h = [reflectionless_defect(plane_measure(2, 1, h, 16.0), K, dic).defect for h in (1 / 16, 1 / 32, 1 / 64)]
        assert abs(by_h[0] - by_h[1]) <= 1 / 16
        assert abs(by_h[1] - by_h[2]) <= 1 / 32
