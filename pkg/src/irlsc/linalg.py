"""Dense linear-algebra kernel.

Matrices are plain float64 numpy arrays. Cholesky factors are stored as
upper-triangular ``R`` with ``A = R.T @ R``.
"""

import numpy as np
import scipy.linalg
from numba import njit

SYMMETRY_TOL = 1e-12


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A pivot of the Cholesky factorization was not positive."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A triangular factor has a zero on its diagonal."""


def as_matrix(a, name="matrix"):
    """Return ``a`` as a 2-D float64 array, rejecting NaN/Inf."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _as_vector(x, n, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != n:
        raise DimensionError(f"{name} must have length {n}, got shape {x.shape}")
    return x


def cholesky(A):
    """Upper Cholesky factor of a symmetric positive-definite matrix.

    The input is symmetrized as ``(A + A.T) / 2`` after checking that its
    asymmetry is below ``SYMMETRY_TOL`` (relative to its largest entry).
    """
    A = as_matrix(A, "A")
    n, m = A.shape
    if n != m:
        raise DimensionError(f"A must be square, got {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise DimensionError("A is not symmetric")
    A = 0.5 * (A + A.T)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from None
    R = np.ascontiguousarray(L.T)
    if np.any(np.diag(R) <= 0.0):
        raise NotPositiveDefiniteError("non-positive pivot")
    return R


@njit(cache=True, fastmath=True)
def _cholupdate(R, x):
    # Givens sweep; R and x are overwritten. x must be a scratch copy.
    n = x.shape[0]
    for k in range(n):
        xk = x[k]
        if xk == 0.0:
            continue
        rkk = R[k, k]
        r = np.sqrt(rkk * rkk + xk * xk)
        c = r / rkk
        s = xk / rkk
        inv_c = 1.0 / c
        R[k, k] = r
        row = R[k]
        for j in range(k + 1, n):
            rj = (row[j] + s * x[j]) * inv_c
            row[j] = rj
            x[j] = c * x[j] - s * rj


def chol_rank_one_update(R, x, overwrite=False):
    """Cholesky factor of ``R.T @ R + outer(x, x)`` in O(d^2).

    Args:
        R: upper-triangular factor with positive diagonal, shape (d, d).
        x: update vector of length d.
        overwrite: update ``R`` in place (it must then be a C-contiguous
            float64 array) instead of returning a copy.

    Returns:
        The updated factor (``R`` itself when ``overwrite`` is set).
    """
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DimensionError(f"R must be square, got {R.shape}")
    x = np.array(_as_vector(x, R.shape[0]), dtype=np.float64, copy=True)
    if overwrite:
        if R.dtype != np.float64 or not R.flags.c_contiguous or not R.flags.writeable:
            raise ValueError("in-place update needs a writeable C-contiguous float64 array")
        out = R
    else:
        out = np.array(R, dtype=np.float64, order="C", copy=True)
    _cholupdate(out, x)
    return out


def _check_triangular_solve(R, B):
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DimensionError(f"R must be square, got {R.shape}")
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != R.shape[0]:
        raise DimensionError(f"B has {B.shape[0]} rows, expected {R.shape[0]}")
    if np.any(np.diag(R) == 0.0):
        raise SingularMatrixError("zero on the diagonal of R")
    return B


def solve_upper(R, B):
    """Solve ``R @ X = B`` by back substitution."""
    B = _check_triangular_solve(R, B)
    return scipy.linalg.solve_triangular(R, B, lower=False, check_finite=False)


def solve_lower_transposed(R, B):
    """Solve ``R.T @ X = B`` by forward substitution."""
    B = _check_triangular_solve(R, B)
    return scipy.linalg.solve_triangular(R, B, trans="T", lower=False, check_finite=False)


def spd_solve(R, B):
    """Solve ``(R.T @ R) @ X = B`` given the Cholesky factor ``R``."""
    return solve_upper(R, solve_lower_transposed(R, B))


def matmul(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise DimensionError(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def outer(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise DimensionError("outer expects two vectors")
    return np.outer(x, y)


def transpose(A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"transpose expects a 2-D array, got {A.shape}")
    return np.ascontiguousarray(A.T)
