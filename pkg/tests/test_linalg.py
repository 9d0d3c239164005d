import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irlsc import linalg


def random_spd(rng, d):
    M = rng.standard_normal((d, d))
    return M.T @ M + np.eye(d)


def random_upper(rng, d):
    R = np.triu(rng.standard_normal((d, d)))
    R[np.diag_indices(d)] = rng.uniform(0.5, 2.0, d)
    return R


def naive_matmul(A, B):
    n, m = A.shape
    p = B.shape[1]
    C = np.zeros((n, p))
    for i in range(n):
        for j in range(p):
            s = 0.0
            for k in range(m):
                s += A[i, k] * B[k, j]
            C[i, j] = s
    return C


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(linalg.cholesky(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(linalg.cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_reconstructs_random_spd(self):
        A = random_spd(np.random.default_rng(0), 5)
        R = linalg.cholesky(A)
        assert np.allclose(np.tril(R, -1), 0.0)
        assert np.all(np.diag(R) > 0)
        np.testing.assert_allclose(R.T @ R, A, rtol=1e-10, atol=1e-10 * np.abs(A).max())

    def test_rejects_non_square(self):
        with pytest.raises(linalg.DimensionError):
            linalg.cholesky(np.ones((2, 3)))

    def test_rejects_asymmetric(self):
        with pytest.raises(linalg.DimensionError):
            linalg.cholesky(np.array([[2.0, 1.0], [0.0, 2.0]]))

    def test_absorbs_roundoff_asymmetry(self):
        A = np.array([[2.0, 1.0], [1.0 + 1e-14, 2.0]])
        R = linalg.cholesky(A)
        np.testing.assert_allclose(R.T @ R, 0.5 * (A + A.T), rtol=1e-12)

    def test_rejects_indefinite(self):
        with pytest.raises(linalg.NotPositiveDefiniteError):
            linalg.cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            linalg.cholesky(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestRankOneUpdate:
    def test_zero_update(self):
        np.testing.assert_array_equal(linalg.chol_rank_one_update(np.eye(2), np.zeros(2)), np.eye(2))

    def test_scalar(self):
        np.testing.assert_allclose(linalg.chol_rank_one_update(np.eye(1), np.ones(1)), [[np.sqrt(2.0)]])

    def test_matches_refactorization(self):
        rng = np.random.default_rng(1)
        A = random_spd(rng, 6)
        x = rng.standard_normal(6)
        R1 = linalg.chol_rank_one_update(linalg.cholesky(A), x)
        R2 = linalg.cholesky(A + np.outer(x, x))
        np.testing.assert_allclose(R1, R2, rtol=0, atol=1e-10)

    def test_does_not_mutate_by_default(self):
        R = np.eye(3)
        x = np.ones(3)
        linalg.chol_rank_one_update(R, x)
        np.testing.assert_array_equal(R, np.eye(3))
        np.testing.assert_array_equal(x, np.ones(3))

    def test_in_place(self):
        R = 2.0 * np.eye(3)
        out = linalg.chol_rank_one_update(R, np.array([1.0, 0.0, 0.0]), overwrite=True)
        assert out is R
        assert R[0, 0] == pytest.approx(np.sqrt(5.0))

    def test_length_mismatch(self):
        with pytest.raises(linalg.DimensionError):
            linalg.chol_rank_one_update(np.eye(3), np.ones(2))

    @settings(max_examples=60, deadline=None)
    @given(d=st.integers(1, 50), seed=st.integers(0, 2**32 - 1))
    def test_property_refactorization(self, d, seed):
        rng = np.random.default_rng(seed)
        A = random_spd(rng, d)
        x = rng.standard_normal(d)
        R1 = linalg.chol_rank_one_update(linalg.cholesky(A), x)
        R2 = linalg.cholesky(A + np.outer(x, x))
        scale = max(1.0, np.abs(R2).max())
        np.testing.assert_allclose(R1, R2, rtol=0, atol=1e-10 * scale)
        assert np.all(np.diag(R1) > 0)
        assert np.all(np.tril(R1, -1) == 0.0)

    def test_quadratic_scaling(self):
        # doubling d should cost about 4x; allow up to ~5x plus timer noise
        rng = np.random.default_rng(2)

        def median_time(d):
            R = linalg.cholesky(random_spd(rng, d))
            xs = rng.standard_normal((60, d)) * 0.1
            linalg.chol_rank_one_update(R, xs[0], overwrite=True)
            t = []
            for x in xs:
                t0 = time.perf_counter()
                linalg.chol_rank_one_update(R, x, overwrite=True)
                t.append(time.perf_counter() - t0)
            return np.median(t)

        ratio = median_time(1600) / median_time(800)
        assert ratio <= 5.5


class TestTriangularSolves:
    def test_identity(self):
        B = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(linalg.solve_upper(np.eye(3), B), B)
        np.testing.assert_array_equal(linalg.solve_lower_transposed(np.eye(3), B), B)

    def test_diagonal(self):
        R = np.diag([2.0, 4.0])
        b = np.array([[2.0], [4.0]])
        np.testing.assert_allclose(linalg.solve_upper(R, b), [[1.0], [1.0]])
        np.testing.assert_allclose(linalg.solve_lower_transposed(R, b), [[1.0], [1.0]])

    @pytest.mark.parametrize("solver,apply", [
        (linalg.solve_upper, lambda R, X: R @ X),
        (linalg.solve_lower_transposed, lambda R, X: R.T @ X),
    ])
    def test_residual(self, solver, apply):
        rng = np.random.default_rng(3)
        R = random_upper(rng, 5)
        B = rng.standard_normal((5, 3))
        X = solver(R, B)
        assert np.linalg.norm(apply(R, X) - B) <= 1e-10 * np.linalg.norm(B)

    def test_singular(self):
        R = np.array([[1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(linalg.SingularMatrixError):
            linalg.solve_upper(R, np.ones(2))
        with pytest.raises(linalg.SingularMatrixError):
            linalg.solve_lower_transposed(R, np.ones(2))

    def test_dimension_mismatch(self):
        with pytest.raises(linalg.DimensionError):
            linalg.solve_upper(np.eye(3), np.ones((2, 1)))


class TestSpdSolve:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        np.testing.assert_allclose(linalg.spd_solve(np.sqrt(1.0) * np.eye(3), b), b)

    def test_diagonal(self):
        R = linalg.cholesky(np.diag([2.0, 2.0]))
        np.testing.assert_allclose(linalg.spd_solve(R, np.array([4.0, 2.0])), [2.0, 1.0])

    def test_matches_explicit_inverse(self):
        rng = np.random.default_rng(4)
        A = random_spd(rng, 6)
        B = rng.standard_normal((6, 2))
        X = linalg.spd_solve(linalg.cholesky(A), B)
        np.testing.assert_allclose(X, np.linalg.inv(A) @ B, rtol=1e-9, atol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(d=st.integers(1, 30), cols=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
    def test_roundtrip_property(self, d, cols, seed):
        rng = np.random.default_rng(seed)
        R = linalg.cholesky(random_spd(rng, d))
        B = rng.standard_normal((d, cols))
        back = linalg.matmul(R.T @ R, linalg.spd_solve(R, B))
        np.testing.assert_allclose(back, B, rtol=0, atol=1e-9 * max(1.0, np.abs(B).max()))

    def test_factor_gives_positive_quadratic_form(self):
        rng = np.random.default_rng(5)
        R = random_upper(rng, 8)
        for _ in range(20):
            x = rng.standard_normal(8)
            assert x @ (R.T @ R) @ x > 0


class TestProducts:
    def test_matmul_identity(self):
        B = np.arange(4.0).reshape(2, 2)
        np.testing.assert_array_equal(linalg.matmul(np.eye(2), B), B)

    def test_outer(self):
        np.testing.assert_array_equal(linalg.outer([1, 0], [0, 1]), [[0, 1], [0, 0]])

    def test_matmul_matches_loop(self):
        rng = np.random.default_rng(6)
        A = rng.integers(-5, 5, (4, 3)).astype(float)
        B = rng.integers(-5, 5, (3, 2)).astype(float)
        np.testing.assert_array_equal(linalg.matmul(A, B), naive_matmul(A, B))

    def test_transpose(self):
        A = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(linalg.transpose(A), A.T)

    def test_mismatch(self):
        with pytest.raises(linalg.DimensionError):
            linalg.matmul(np.ones((2, 3)), np.ones((2, 3)))
        with pytest.raises(linalg.DimensionError):
            linalg.outer(np.ones((2, 2)), np.ones(2))
