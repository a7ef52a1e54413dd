"""Utility functions for working with dense matrices"""

import math

import lazy_loader as lazy

from aircomp.utils.errors import DimensionError

np = lazy.load("numpy")


def vec(A):
    """Stack the columns of a matrix into a vector (column-major order)"""

    return np.asarray(A).reshape(-1, order="F")


def unvec(v, rows=None):
    """Inverse of `vec`

    Parameters
    ----------
    v : numpy.ndarray
        Vector of length rows * cols

    rows : int, default=None
        Number of rows of the output. If None, `v` must have a perfect
        square length and a square matrix is returned.

    Returns
    -------
    A : numpy.ndarray
        Matrix whose columns are consecutive slices of `v`
    """

    v = np.asarray(v)
    if rows is None:
        rows = square_side(v.size)

    return v.reshape(rows, -1, order="F")


def square_side(n):
    """Return K such that K * K == n

    Raises
    ------
    DimensionError
        If `n` is not a perfect square
    """

    side = math.isqrt(n)
    if side * side != n or side == 0:
        raise DimensionError(f"{n=} is not the square of a positive integer")

    return side


def kron_side(A):
    """Return K for a square K^2 x K^2 matrix, validating the shape"""

    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {A.shape}")

    return square_side(A.shape[0])


def rel_frobenius(A, B):
    """Frobenius norm of A - B relative to the norm of B

    Returns the absolute residual when B is the zero matrix.
    """

    A = np.asarray(A)
    B = np.asarray(B)
    residual = np.linalg.norm(A - B)
    scale = np.linalg.norm(B)

    if scale == 0:
        return float(residual)

    return float(residual / scale)


def first_nonzero_positive(v, tol=1e-12):
    """Flip the sign of `v` so that its first nonzero entry is positive

    Entries whose magnitude is at most `tol` times the largest magnitude
    count as zero. Returns the (possibly) flipped vector and the sign used.
    """

    v = np.asarray(v)
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0:
        return v, 1.0

    idx = np.flatnonzero(np.abs(v) > tol * scale)[0]
    sign = 1.0 if v[idx] > 0 else -1.0

    return sign * v, sign


def total_power(S):
    """Total transmit power ||S||_F^2 of a sequence matrix"""

    S = np.asarray(S)
    return float(np.sum(S * S))


def max_column_power(S):
    """Largest per-node transmit power max_k ||s_k||^2"""

    S = np.asarray(S)
    if S.size == 0:
        return 0.0

    return float(np.max(np.sum(S * S, axis=0)))
