"""Block rearrangement and Kronecker-sum decompositions of K^2 x K^2 matrices

The rearrangement R(A) stacks the vectorized K x K blocks of A as rows, in
column-major block order (1,1), (2,1), ..., (K,1), (1,2), ... Under R a
Kronecker product B (x) C becomes the rank-one matrix vec(B) vec(C)^T, so
an SVD of R(A) yields A = sum_k sigma_k U_k (x) V_k. When R(A) = A = A^T
and A is positive semidefinite, an EVD of A itself gives the symmetric
form A = sum_k M_k (x) M_k with M_k = sqrt(lambda_k) U_k.
"""

import logging
from dataclasses import dataclass

import lazy_loader as lazy

from aircomp.utils.errors import StructureError
from aircomp.utils.linalg import (
    first_nonzero_positive,
    kron_side,
    rel_frobenius,
    unvec,
)

np = lazy.load("numpy")

# Preconditions of the symmetric (EVD) decomposition
SYMMETRY_TOL = 1e-8
NEGATIVE_EIG_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KronFactorization:
    """Weighted Kronecker sum A = sum_k weights[k] * left[k] (x) right[k]

    Attributes
    ----------
    weights : numpy.ndarray
        Nonnegative weights sigma_k sorted in descending order

    left, right : numpy.ndarray
        Stacks of K x K factors, shape (r, K, K). For the symmetric
        decomposition both stacks hold the same matrices U_k.

    source_dim : int
        K, the block size of the decomposed matrix

    symmetric : bool
        True if produced by `kron_decompose_symmetric`
    """

    weights: object
    left: object
    right: object
    source_dim: int
    symmetric: bool = False

    def __len__(self):
        return len(self.weights)

    @property
    def factors(self):
        """Scaled factors M_k = sqrt(sigma_k) U_k, shape (r, K, K)"""

        return np.sqrt(self.weights)[:, None, None] * self.left

    def reconstruct(self):
        """Dense sum_k sigma_k U_k (x) V_k"""

        K = self.source_dim
        A = np.zeros((K * K, K * K))
        for weight, U, V in zip(self.weights, self.left, self.right):
            A += weight * np.kron(U, V)

        return A


def rearrange(A):
    """Block rearrangement R(A)

    Row i + K j of the output is vec(A_ij)^T, where A_ij is the (i, j) block
    of the K x K block partition of A.

    Raises
    ------
    DimensionError
        If A is not square with a perfect-square side
    """

    A = np.asarray(A)
    K = kron_side(A)

    # blocks[i, a, j, b] = A[i K + a, j K + b]
    blocks = A.reshape(K, K, K, K)

    return blocks.transpose(2, 0, 3, 1).reshape(K * K, K * K)


def inverse_rearrange(R):
    """Inverse of `rearrange`: inverse_rearrange(rearrange(A)) == A"""

    R = np.asarray(R)
    K = kron_side(R)

    return R.reshape(K, K, K, K).transpose(1, 3, 0, 2).reshape(K * K, K * K)


def kron_decompose(A):
    """Kronecker-sum decomposition of A from the SVD of R(A)

    Parameters
    ----------
    A : numpy.ndarray
        Square matrix of side K^2

    Returns
    -------
    fact : KronFactorization
        Weights are the singular values of R(A); left and right factors are
        the unvectorized singular vectors. Each singular pair is signed so
        that the first nonzero entry of u_k is positive.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the SVD does not converge
    """

    A = np.asarray(A, dtype=float)
    K = kron_side(A)

    U, s, Vt = np.linalg.svd(rearrange(A))

    left = np.empty((K * K, K, K))
    right = np.empty((K * K, K, K))
    for k in range(K * K):
        u, sign = first_nonzero_positive(U[:, k])
        left[k] = unvec(u, K)
        right[k] = unvec(sign * Vt[k], K)

    return KronFactorization(weights=s, left=left, right=right, source_dim=K)


def _is_commutation_invariant(A, K, tol):
    """True if A is unchanged by swapping the two indices of its column pairs

    For such A every eigenvector with a nonzero eigenvalue is the vec of a
    symmetric matrix.
    """

    swapped = A.reshape(K * K, K, K).transpose(0, 2, 1).reshape(K * K, K * K)
    return rel_frobenius(swapped, A) <= tol


def kron_decompose_symmetric(A):
    """Symmetric Kronecker-sum decomposition A = sum_k M_k (x) M_k

    Parameters
    ----------
    A : numpy.ndarray
        Symmetric positive semidefinite matrix of side K^2 with R(A) = A

    Returns
    -------
    fact : KronFactorization
        Weights are the eigenvalues of A in descending order, with
        floating-point negatives clamped to zero; left and right hold the
        unvectorized eigenvectors U_k, so that `fact.factors` gives M_k.

    Raises
    ------
    StructureError
        If A is not symmetric, has an eigenvalue below -1e-10 lambda_max,
        or is not invariant under the rearrangement. The message names the
        failed check.

    Notes
    -----
    Since R(A) = A, the EVD of A is also an SVD of R(A), and unvectorizing
    its eigenvectors gives the Kronecker factors directly. If A is in
    addition invariant under the commutation of index pairs (true for
    moment matrices), eigenvectors are projected onto symmetric matrices,
    which leaves the sum unchanged and removes mixing with the null space.
    """

    A = np.asarray(A, dtype=float)
    K = kron_side(A)

    asym = rel_frobenius(A.T, A)
    if asym > SYMMETRY_TOL:
        raise StructureError(f"symmetry check failed: ||A - A^T|| / ||A|| = {asym:.3e}")

    rearranged = rel_frobenius(rearrange(A), A)
    if rearranged > SYMMETRY_TOL:
        raise StructureError(
            f"rearrangement check failed: ||R(A) - A|| / ||A|| = {rearranged:.3e}"
        )

    eigvals, eigvecs = np.linalg.eigh(0.5 * (A + A.T))
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]

    lam_max = max(eigvals[0], 0.0)
    if eigvals[-1] < -NEGATIVE_EIG_TOL * lam_max:
        raise StructureError(
            f"definiteness check failed: eigenvalue {eigvals[-1]:.3e} "
            f"below -{NEGATIVE_EIG_TOL} * {lam_max:.3e}"
        )
    eigvals = np.clip(eigvals, 0.0, None)

    symmetrize = _is_commutation_invariant(A, K, SYMMETRY_TOL)

    factors = np.empty((K * K, K, K))
    for k in range(K * K):
        u, _ = first_nonzero_positive(eigvecs[:, k])
        U = unvec(u, K)
        factors[k] = 0.5 * (U + U.T) if symmetrize else U

    logging.debug(
        "Symmetric Kronecker decomposition of K=%s: leading weights %s",
        K,
        eigvals[: min(4, eigvals.size)],
    )

    return KronFactorization(
        weights=eigvals,
        left=factors,
        right=factors,
        source_dim=K,
        symmetric=True,
    )


def truncate(fact, rel_tol):
    """Drop factors with sigma_k < rel_tol * sigma_1

    Parameters
    ----------
    fact : KronFactorization
        Factorization with descending weights

    rel_tol : float
        Relative threshold in [0, 1). Zero returns `fact` unchanged.

    Returns
    -------
    truncated : KronFactorization
        Leading factors, order preserved
    """

    if not 0 <= rel_tol < 1:
        raise ValueError(f"rel_tol must lie in [0, 1), got {rel_tol}")

    if rel_tol == 0 or len(fact) == 0:
        return fact

    keep = fact.weights >= rel_tol * fact.weights[0]
    logging.debug("Truncation keeps %s of %s Kronecker terms", keep.sum(), len(fact))

    return KronFactorization(
        weights=fact.weights[keep],
        left=fact.left[keep],
        right=fact.right[keep],
        source_dim=fact.source_dim,
        symmetric=fact.symmetric,
    )
