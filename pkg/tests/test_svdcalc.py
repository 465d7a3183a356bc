import numpy as np
import pytest

from lipkit.errors import DegenerateSpectrum, OrderOverflow, ZeroSingular
from lipkit.matcore import DenseMatrix, full_svd, vec
from lipkit.svdcalc import (
    PerturbationSeries,
    fd_gradient_oracle,
    jordan_wielandt,
    reduced_resolvent,
    sv_expansion_coeff,
    sv_hessian,
    sv_jacobian,
)

from conftest import random_matrix_with_spectrum


def fd_hessian_oracle(a: DenseMatrix, k: int, step: float = 1e-5) -> np.ndarray:
    """Central differences of the closed-form Jacobian, column by column in
    the column-major vec layout. Independent of sv_hessian."""
    m, n = a.shape
    base = np.array(a.array)
    out = np.empty((m * n, m * n))
    for col in range(m * n):
        i, j = col % m, col // m
        bumped = base.copy()
        bumped[i, j] += step
        up = sv_jacobian(full_svd(DenseMatrix(bumped)), k).array
        bumped[i, j] -= 2 * step
        down = sv_jacobian(full_svd(DenseMatrix(bumped)), k).array
        out[:, col] = ((up - down) / (2 * step)).ravel(order="F")
    return out


class TestJacobian:
    def test_diag_axis_aligned(self):
        j = sv_jacobian(full_svd(DenseMatrix(np.diag([3.0, 1.0]))), 1)
        np.testing.assert_allclose(j.array, [[1.0, 0.0], [0.0, 0.0]])

    def test_matches_fd_random(self, rng):
        a = DenseMatrix(rng.standard_normal((6, 10)))
        svd = full_svd(a)
        for k in range(1, svd.rank + 1):
            j = sv_jacobian(svd, k)
            fd = fd_gradient_oracle(a, k, 1e-6)
            assert np.linalg.norm(j.array - fd.array) <= 1e-8

    def test_inner_product_gives_sigma(self, rng):
        a = DenseMatrix(rng.uniform(-2, 2, size=(5, 7)))
        svd = full_svd(a)
        for k in range(1, svd.rank + 1):
            j = sv_jacobian(svd, k)
            assert float(vec(j) @ vec(a)) == pytest.approx(svd.sigma(k), abs=1e-12)

    def test_rank_one_unit_frobenius(self, rng):
        svd = full_svd(DenseMatrix(rng.standard_normal((4, 6))))
        for k in range(1, svd.rank + 1):
            j = sv_jacobian(svd, k).array
            assert np.linalg.matrix_rank(j) == 1
            assert np.linalg.norm(j) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateSpectrum):
            sv_jacobian(full_svd(DenseMatrix(np.eye(3))), 1)

    def test_index_out_of_range(self):
        svd = full_svd(DenseMatrix(np.diag([2.0, 1.0])))
        with pytest.raises(ZeroSingular):
            sv_jacobian(svd, 3)


class TestHessian:
    def test_diag_frozen_entries(self):
        # frozen expected values from the FD oracle (step 1e-5)
        h = sv_hessian(full_svd(DenseMatrix(np.diag([3.0, 1.0]))), 1).array
        expect = np.zeros((4, 4))
        expect[1, 1] = expect[2, 2] = 3.0 / 8.0
        expect[1, 2] = expect[2, 1] = 1.0 / 8.0
        np.testing.assert_allclose(h, expect, atol=1e-14)

    def test_matches_fd_random(self, rng):
        a = DenseMatrix(rng.standard_normal((6, 10)))
        svd = full_svd(a)
        for k in range(1, svd.rank + 1):
            h = sv_hessian(svd, k).array
            fd = fd_hessian_oracle(a, k)
            assert np.abs(h - fd).max() <= 1e-6

    def test_exactly_symmetric(self, rng):
        h = sv_hessian(full_svd(DenseMatrix(rng.standard_normal((3, 4)))), 2).array
        assert np.array_equal(h, h.T)

    def test_psd_for_top_singular(self, rng):
        for _ in range(5):
            h = sv_hessian(full_svd(DenseMatrix(rng.standard_normal((4, 5)))), 1).array
            assert np.linalg.eigvalsh(h).min() >= -1e-10

    def test_zero_singular_raises(self, rng):
        a = random_matrix_with_spectrum(rng, 3, 3, [2.0, 1.0, 0.0])
        with pytest.raises(ZeroSingular):
            sv_hessian(full_svd(DenseMatrix(a)), 3)

    def test_near_multiple_raises(self, rng):
        a = random_matrix_with_spectrum(rng, 3, 3, [2.0, 2.0 + 1e-12, 1.0])
        with pytest.raises(DegenerateSpectrum):
            sv_hessian(full_svd(DenseMatrix(a)), 3)


class TestFirstAndSecondOrderConsistency:
    def test_first_order_slope(self, rng):
        a = DenseMatrix(rng.standard_normal((6, 10)))
        svd = full_svd(a)
        delta = rng.standard_normal((6, 10))
        j = sv_jacobian(svd, 1)
        pred = float(vec(j) @ delta.ravel(order="F"))
        remainders = []
        for eps in (1e-3, 1e-4, 1e-5):
            s_eps = np.linalg.svd(a.array + eps * delta, compute_uv=False)[0]
            remainders.append(abs(s_eps - svd.sigma(1) - eps * pred))
        # Richardson: remainder is O(eps^2), so each decade shrinks ~100x
        assert remainders[0] / remainders[1] == pytest.approx(100, rel=0.5)
        assert remainders[1] / remainders[2] == pytest.approx(100, rel=0.5)

    def test_second_order_remainder(self, rng):
        a = DenseMatrix(rng.standard_normal((6, 10)))
        svd = full_svd(a)
        delta = rng.standard_normal((6, 10))
        dv = delta.ravel(order="F")
        j = sv_jacobian(svd, 1)
        h = sv_hessian(svd, 1).array
        eps = 1e-3
        s_eps = np.linalg.svd(a.array + eps * delta, compute_uv=False)[0]
        quad = 0.5 * eps**2 * float(dv @ h @ dv)
        remainder = s_eps - svd.sigma(1) - eps * float(vec(j) @ dv)
        assert abs(remainder - quad) <= 1e-3 * abs(quad)


class TestJordanWielandt:
    def test_scalar_case(self):
        jw = jordan_wielandt(full_svd(DenseMatrix(np.array([[2.0]]))))
        np.testing.assert_allclose(jw.embedding.array, [[0.0, 2.0], [2.0, 0.0]])
        np.testing.assert_allclose(jw.pos_eigvecs[:, 0], [1, 1] / np.sqrt(2))
        np.testing.assert_allclose(jw.neg_eigvecs[:, 0], [1, -1] / np.sqrt(2))

    def test_zero_matrix_null_dimension(self):
        jw = jordan_wielandt(full_svd(DenseMatrix(np.zeros((2, 2)))))
        assert not np.any(jw.embedding.array)
        assert jw.left_null.shape[1] + jw.right_null.shape[1] == 4

    def test_eigenvalues_match_eigensolver(self, rng):
        a = DenseMatrix(rng.standard_normal((4, 3)))
        svd = full_svd(a)
        jw = jordan_wielandt(svd)
        eigs = np.sort(np.linalg.eigvalsh(jw.embedding.array))
        expect = np.sort(
            np.concatenate([svd.singulars, -svd.singulars, np.zeros(1)])
        )
        np.testing.assert_allclose(eigs, expect, atol=1e-10)

    def test_eigenvector_equations_and_orthonormality(self, rng):
        svd = full_svd(DenseMatrix(rng.standard_normal((3, 5))))
        jw = jordan_wielandt(svd)
        t = jw.embedding.array
        for i in range(jw.sigmas.size):
            np.testing.assert_allclose(
                t @ jw.pos_eigvecs[:, i], jw.sigmas[i] * jw.pos_eigvecs[:, i], atol=1e-10
            )
            np.testing.assert_allclose(
                t @ jw.neg_eigvecs[:, i], -jw.sigmas[i] * jw.neg_eigvecs[:, i], atol=1e-10
            )
        basis = np.hstack([jw.pos_eigvecs, jw.neg_eigvecs, jw.left_null, jw.right_null])
        np.testing.assert_allclose(basis.T @ basis, np.eye(8), atol=1e-10)


class TestReducedResolvent:
    def test_defining_identity_diag(self):
        svd = full_svd(DenseMatrix(np.diag([3.0, 1.0])))
        jw = jordan_wielandt(svd)
        s = reduced_resolvent(jw, 1).matrix.array
        t = jw.embedding.array
        w = jw.pos_eigvecs[:, 0]
        lhs = (t - 3.0 * np.eye(4)) @ s
        np.testing.assert_allclose(lhs, np.eye(4) - np.outer(w, w), atol=1e-9)

    def test_annihilates_target(self, rng):
        jw = jordan_wielandt(full_svd(DenseMatrix(rng.standard_normal((4, 3)))))
        for k in range(1, jw.sigmas.size + 1):
            s = reduced_resolvent(jw, k).matrix.array
            assert np.abs(s @ jw.pos_eigvecs[:, k - 1]).max() <= 1e-12

    def test_scalar_single_negative_branch(self):
        jw = jordan_wielandt(full_svd(DenseMatrix(np.array([[2.0]]))))
        s = reduced_resolvent(jw, 1).matrix.array
        wneg = jw.neg_eigvecs[:, 0]
        np.testing.assert_allclose(s, -np.outer(wneg, wneg) / 4.0, atol=1e-14)
        t = jw.embedding.array
        w = jw.pos_eigvecs[:, 0]
        np.testing.assert_allclose(
            (t - 2.0 * np.eye(2)) @ s, np.eye(2) - np.outer(w, w), atol=1e-12
        )


def _mpmath_taylor_coeffs(series, k, orders, x_scale=1e-2, dps=40):
    """High-precision polynomial-fit oracle for the expansion coefficients."""
    import mpmath

    mpmath.mp.dps = dps
    degree = max(orders) + 4
    xs = [x_scale * s for s in range(-degree // 2 - 1, degree // 2 + 2) if s != 0]
    rows, ys = [], []
    for x in xs:
        a_x = mpmath.matrix(series.evaluate(x).array.tolist())
        svals = mpmath.svd_r(a_x, compute_uv=False)
        svals = sorted((svals[i] for i in range(svals.rows)), reverse=True)
        ys.append(svals[k - 1])
        rows.append([mpmath.mpf(x) ** p for p in range(degree + 1)])
    sol = mpmath.lu_solve(mpmath.matrix(rows), mpmath.matrix(ys))
    return {n: float(sol[n]) for n in orders}


class TestExpansionCoefficients:
    def _series(self, rng):
        base = DenseMatrix(random_matrix_with_spectrum(rng, 4, 4, [3.0, 2.1, 1.3, 0.6]))
        return PerturbationSeries(base, [DenseMatrix(rng.standard_normal((4, 4)))])

    def test_order_one_is_jacobian_pairing(self, rng):
        series = self._series(rng)
        svd = full_svd(series.base)
        for k in (1, 2, 3):
            j = sv_jacobian(svd, k)
            pairing = float(vec(j) @ vec(series.terms[0]))
            assert sv_expansion_coeff(series, k, 1) == pytest.approx(pairing, abs=1e-12)

    def test_order_two_is_half_hessian_quadratic(self, rng):
        series = self._series(rng)
        svd = full_svd(series.base)
        dv = vec(series.terms[0])
        for k in (1, 2, 3):
            h = sv_hessian(svd, k).array
            expect = 0.5 * float(dv @ h @ dv)
            assert sv_expansion_coeff(series, k, 2) == pytest.approx(expect, abs=1e-9)

    def test_closed_form_cross_coupling(self):
        # A = diag(3, 1), A1 = antidiagonal: sigma_1(x) = 2 + sqrt(1 + x^2),
        # so the coefficients are 0, 1/2, 0, -1/8
        series = PerturbationSeries(
            DenseMatrix(np.diag([3.0, 1.0])),
            [DenseMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))],
        )
        got = [sv_expansion_coeff(series, 1, n) for n in (1, 2, 3, 4)]
        np.testing.assert_allclose(got, [0.0, 0.5, 0.0, -0.125], atol=1e-12)

    def test_matches_polynomial_fit(self):
        rng = np.random.default_rng(2)
        base = DenseMatrix(random_matrix_with_spectrum(rng, 4, 4, [3.0, 2.1, 1.3, 0.6]))
        series = PerturbationSeries(base, [DenseMatrix(rng.standard_normal((4, 4)))])
        for k in (1, 2, 3):
            fit = _mpmath_taylor_coeffs(series, k, (1, 2, 3, 4))
            for n in (1, 2, 3, 4):
                got = sv_expansion_coeff(series, k, n)
                assert got == pytest.approx(fit[n], rel=1e-4, abs=1e-10)

    def test_second_order_series_term(self):
        rng = np.random.default_rng(3)
        base = DenseMatrix(random_matrix_with_spectrum(rng, 3, 3, [2.5, 1.4, 0.7]))
        a1 = DenseMatrix(rng.standard_normal((3, 3)))
        a2 = DenseMatrix(rng.standard_normal((3, 3)))
        series = PerturbationSeries(base, [a1, a2])
        fit = _mpmath_taylor_coeffs(series, 1, (1, 2, 3))
        for n in (1, 2, 3):
            assert sv_expansion_coeff(series, 1, n) == pytest.approx(fit[n], rel=1e-4)

    def test_order_overflow(self, rng):
        series = self._series(rng)
        with pytest.raises(OrderOverflow):
            sv_expansion_coeff(series, 1, 7)

    def test_derivative_bridge(self, rng):
        # D^n sigma_k [dA, ..] = n! * coefficient for the linear-term series
        series = self._series(rng)
        svd = full_svd(series.base)
        j = sv_jacobian(svd, 1)
        d1 = float(vec(j) @ vec(series.terms[0]))
        assert 1 * sv_expansion_coeff(series, 1, 1) == pytest.approx(d1, abs=1e-12)
        dv = vec(series.terms[0])
        d2 = float(dv @ sv_hessian(svd, 1).array @ dv)
        assert 2 * sv_expansion_coeff(series, 1, 2) == pytest.approx(d2, abs=1e-9)

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            PerturbationSeries(
                DenseMatrix(np.eye(2)), [DenseMatrix(np.eye(3))]
            )


class TestFdGradientOracle:
    def test_known_jacobian(self):
        fd = fd_gradient_oracle(DenseMatrix(np.diag([3.0, 1.0])), 1, 1e-6)
        np.testing.assert_allclose(fd.array, [[1.0, 0.0], [0.0, 0.0]], atol=1e-9)

    def test_runs_on_degenerate_input(self):
        # equal singular values: values are returned but untrusted there
        fd = fd_gradient_oracle(DenseMatrix(np.eye(3)), 1, 1e-6)
        assert fd.shape == (3, 3)
        assert np.all(np.isfinite(fd.array))

    def test_agrees_with_closed_form(self):
        rng = np.random.default_rng(3)
        a = DenseMatrix(rng.standard_normal((5, 7)))
        svd = full_svd(a)
        for k in (1, 3, 5):
            j = sv_jacobian(svd, k)
            fd = fd_gradient_oracle(a, k)
            assert np.abs(j.array - fd.array).max() <= 1e-8

    def test_step_validation(self):
        with pytest.raises(ValueError):
            fd_gradient_oracle(DenseMatrix(np.eye(2)), 1, 0.0)
