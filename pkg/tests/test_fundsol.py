import numpy as np
import pytest

from saturnq import fundsol
from saturnq.operators import apply_Dstar

KS = (-0.9, 0.0, 1.0, 5.0, 20.0)


def rand_points(rng, n, lo=0.3, hi=5.0):
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(lo, hi, size=(n, 1))


class TestSymbol:
    def test_entry_11_on_e1(self):
        for k in (0.0, 1.0, 7.5):
            assert fundsol.symbol_matrix([1.0, 0, 0], k)[0, 0] == pytest.approx(1 + 2 * k / 3)

    def test_k0_is_scaled_identity(self, rng):
        xi = rng.normal(size=3)
        np.testing.assert_allclose(fundsol.symbol_matrix(xi, 0.0), (xi @ xi) * np.eye(6), atol=1e-15)

    def test_entry_44(self):
        assert fundsol.symbol_matrix([1.0, 1.0, 0.0], 3.0)[3, 3] == pytest.approx(5.0)

    def test_axis_permutation(self):
        # the (3,3) entry on e3 equals the (1,1) entry on e1
        for k in (0.5, 4.0):
            assert fundsol.symbol_matrix([0, 0, 1.0], k)[2, 2] == pytest.approx(1 + 2 * k / 3)

    def test_not_symmetric_for_k_nonzero(self):
        N = fundsol.symbol_matrix([1.0, 1.0, 0.0], 1.0)
        assert N[0, 3] != N[3, 0]


class TestFhat:
    def test_solves_symbol_equation(self, rng):
        e11 = fundsol.unit_vec6(1, 1)
        for k in KS:
            for _ in range(100):
                xi = rng.normal(size=3)
                r = fundsol.symbol_matrix(xi, k) @ fundsol.fhat11(xi, k) - e11
                assert np.max(np.abs(r)) <= 1e-10

    def test_k0_collapse(self, rng):
        xi = rng.normal(size=3)
        expect = np.zeros(6)
        expect[0] = 1 / (xi @ xi)
        np.testing.assert_allclose(fundsol.fhat11(xi, 0.0), expect, atol=1e-14)

    def test_value_on_axis(self):
        assert fundsol.fhat11([1.0, 0, 0], 1.0)[0] == pytest.approx(3 / 5)

    def test_zero_frequency(self):
        with pytest.raises(ValueError):
            fundsol.fhat11([0.0, 0.0, 0.0], 1.0)

    def test_closed_form_matches_dense_solve(self, rng):
        xi = rng.normal(size=3)
        np.testing.assert_allclose(fundsol.fhat11(xi, 4.0), fundsol.fhat(1, 1, xi, 4.0), rtol=1e-12)


class TestFundamental:
    def test_laplace_collapse_all_pairs(self, rng):
        p = rand_points(rng, 100)
        r = np.linalg.norm(p, axis=1)[:, None, None]
        for m, n in fundsol.PAIRS:
            expect = fundsol.unit_matrix(m, n) / (4 * np.pi * r)
            assert np.max(np.abs(fundsol.fundamental(m, n, p, 0.0) - expect)) <= 1e-12

    def test_component_23_value(self):
        # F11_23 = [r^2 yz (-8k - 5k^2) + 3k^2 x^2 yz] / (32 pi (2+k)(3+2k) r^5) at (0,1,1), k=1
        F = fundsol.fundamental(1, 1, [0.0, 1.0, 1.0], 1.0)
        assert F[1, 2] == pytest.approx(-26 / (480 * np.pi * 2**2.5), rel=1e-12)
        assert F[1, 2] == pytest.approx(-3.048e-3, abs=5e-7)

    def test_axis_swap_symmetry(self, rng):
        P = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1.0]])
        p = rand_points(rng, 50)
        for k in (0.5, 5.0):
            F22 = fundsol.fundamental(2, 2, p, k)
            F11 = fundsol.fundamental(1, 1, p @ P.T, k)
            assert np.max(np.abs(F22 - P @ F11 @ P.T)) <= 1e-12

    def test_all_pairs_match_fourier_route(self, rng):
        # independent route: numerical N^{-1} e^{mn} fitted to quartics, then inverse kernels
        p = rand_points(rng, 10, 0.5, 3.0)
        for k in (-0.5, 1.0, 5.0):
            for m, n in fundsol.PAIRS:
                a = fundsol.fundamental(m, n, p, k)
                b = fundsol.fundamental_via_fourier(m, n, p, k)
                assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(b))

    def test_f11_printed_numerator(self, rng):
        p = rand_points(rng, 20, 0.5, 3.0)
        for k in KS:
            a = fundsol.fundamental(1, 1, p, k)
            b = fundsol.fundamental_via_fourier(1, 1, p, k, numerator=fundsol.fhat11_numerator)
            assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(b))

    def test_inverse_kernels_k0(self, rng):
        # sum of xi_i^4/|xi|^6 + 2 xi_i^2 xi_j^2/|xi|^6 over all = 1/|xi|^2 -> 1/(4 pi r)
        p = rand_points(rng, 10)
        total = sum(fundsol.quartic_inverse_transform(a, p) for a in
                    [(4, 0, 0), (0, 4, 0), (0, 0, 4)])
        total += 2 * sum(fundsol.quartic_inverse_transform(a, p) for a in
                         [(2, 2, 0), (2, 0, 2), (0, 2, 2)])
        np.testing.assert_allclose(total, 1 / (4 * np.pi * np.linalg.norm(p, axis=1)), rtol=1e-12)

    def test_homogeneity(self, rng):
        p = rand_points(rng, 20)
        for m, n in fundsol.PAIRS:
            for t in (0.3, 2.0, 11.0):
                a = fundsol.fundamental(m, n, t * p, 3.0)
                b = fundsol.fundamental(m, n, p, 3.0) / t
                assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))

    def test_symmetric_values(self, rng):
        F = fundsol.fundamental(1, 3, rand_points(rng, 10), 2.0)
        np.testing.assert_allclose(F, np.swapaxes(F, -1, -2), atol=0)

    def test_pair_order_irrelevant(self, rng):
        p = rand_points(rng, 5)
        np.testing.assert_array_equal(fundsol.fundamental(2, 1, p, 1.0), fundsol.fundamental(1, 2, p, 1.0))

    def test_origin_is_singular(self):
        with pytest.raises(ZeroDivisionError):
            fundsol.fundamental(1, 1, [0.0, 0.0, 0.0], 1.0)

    def test_k_range(self):
        with pytest.raises(ValueError):
            fundsol.fundamental(1, 1, [1.0, 0, 0], -1.0)

    def test_bad_pair(self):
        with pytest.raises(ValueError):
            fundsol.fundamental(1, 4, [1.0, 0, 0], 1.0)


class TestTranslated:
    def test_zero_shift(self, rng):
        p = rand_points(rng, 5)
        np.testing.assert_array_equal(fundsol.fundamental_translated(1, 2, p, [0, 0, 0], 2.0),
                                      fundsol.fundamental(1, 2, p, 2.0))

    def test_depends_on_difference_only(self, rng):
        p = rand_points(rng, 5)
        s = np.array([0.3, -1.0, 2.0])
        a = fundsol.fundamental_translated(2, 3, p + s, s, 2.0)
        np.testing.assert_allclose(a, fundsol.fundamental(2, 3, p, 2.0), rtol=1e-12)

    def test_at_source(self):
        with pytest.raises(ZeroDivisionError):
            fundsol.fundamental_translated(1, 1, [1.0, 2, 3], [1.0, 2, 3], 1.0)

    def test_annihilated_by_adjoint_away_from_source(self):
        s = np.array([0.2, 0.1, -0.3])
        p = np.array([1.1, -0.4, 0.9])
        for m, n in fundsol.PAIRS:
            f = lambda x, m=m, n=n: fundsol.fundamental_translated(m, n, x, s, 5.0)  # noqa: E731
            scale = np.max(np.abs(f(p))) / np.sum((p - s) ** 2)
            assert np.max(np.abs(apply_Dstar(f, p, 5.0, h=1e-3))) <= 1e-4 * scale


class TestGradient:
    def test_complex_step_matches_fd(self, rng):
        p = rand_points(rng, 3, 0.5, 2.0)
        h = 1e-5
        for m, n in ((1, 1), (1, 2), (2, 3)):
            G = fundsol.fundamental_gradient(m, n, p, 2.0)
            for l in range(3):
                e = np.zeros(3)
                e[l] = h
                fd = (fundsol.fundamental(m, n, p + e, 2.0) - fundsol.fundamental(m, n, p - e, 2.0)) / (2 * h)
                np.testing.assert_allclose(G[..., l], fd, atol=1e-7)
