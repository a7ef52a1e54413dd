"""Analytic MSE of the energy detector and its gradient

For a sequence matrix S with Gram matrix G = S^T S, the MSE decomposes as

    J(S) = E[a^2] + E[b^2] + E[c^2] - 2 E[ac]

with

    E[a^2] = tr{M (G (x) G)} - 2 tr{M (I (x) G)} + tr{M}
    E[b^2] = 4 sigma_n2 tr{C G}
    E[c^2] = tr{N}
    E[ac]  = seq_len sigma_n2 tr{C (I - G)}

and E[ab] = E[bc] = 0. The Kronecker traces are evaluated either densely or
through a factorization M = sum_k sigma_k U_k (x) V_k, using
tr{(U (x) V)(X (x) Y)} = tr{U X} tr{V Y}.
"""

import logging
from dataclasses import dataclass

import lazy_loader as lazy

from aircomp.utils.errors import DimensionError, DomainError

np = lazy.load("numpy")

# Slack below zero tolerated for an expectation of a square
NEGATIVE_MSE_SLACK = 1e-9


@dataclass(frozen=True)
class MseBreakdown:
    """The four nonzero expectation terms of the MSE and their combination"""

    e_a2: float
    e_b2: float
    e_c2: float
    e_ac: float
    total: float


def check_sequence_matrix(S, moments):
    """Validate a sequence matrix against the config of a MomentSet

    Returns
    -------
    S : numpy.ndarray
        The input as a float array of shape (seq_len, K)

    Raises
    ------
    DimensionError
        If the shape does not match (seq_len, num_nodes)

    DomainError
        If an entry is not finite
    """

    S = np.asarray(S, dtype=float)
    config = moments.config
    expected = (config.seq_len, config.num_nodes)

    if S.shape != expected:
        raise DimensionError(
            f"Sequence matrix has shape {S.shape}, expected {expected}"
        )

    if not np.all(np.isfinite(S)):
        raise DomainError("Sequence matrix has non-finite entries")

    return S


def _check_factorization(kron, moments):
    K = moments.config.num_nodes
    if kron.source_dim != K:
        raise DimensionError(
            f"Factorization of a K={kron.source_dim} matrix used with K={K} moments"
        )


def kron_trace(Mmat, A, B):
    """Dense tr{M (A (x) B)}"""

    return float(np.sum(Mmat * np.kron(A, B).T))


def _kron_traces_dense(moments, gram):
    identity = np.eye(moments.config.num_nodes)
    quartic = kron_trace(moments.Mmat, gram, gram)
    cross = kron_trace(moments.Mmat, identity, gram)

    return quartic, cross


def _kron_traces_factorized(kron, gram):
    left_g = np.einsum("kij,ji->k", kron.left, gram)
    right_g = np.einsum("kij,ji->k", kron.right, gram)
    left_tr = np.einsum("kii->k", kron.left)

    quartic = float(np.sum(kron.weights * left_g * right_g))
    cross = float(np.sum(kron.weights * left_tr * right_g))

    return quartic, cross


def mse(S, moments, kron=None):
    """Closed-form MSE J(S) and its expectation terms

    Parameters
    ----------
    S : numpy.ndarray
        Sequence matrix of shape (seq_len, K)

    moments : MomentSet
        Moments built for the same SystemConfig

    kron : KronFactorization, default=None
        Factorization of `moments.Mmat`. If given, the Kronecker traces are
        evaluated through it; otherwise the dense K^2 x K^2 form is used.
        The constants tr{M} and tr{N} always come from `moments`.

    Returns
    -------
    breakdown : MseBreakdown
        E[a^2], E[b^2], E[c^2], E[ac] and J = E[a^2] + E[b^2] + E[c^2] - 2 E[ac]
    """

    S = check_sequence_matrix(S, moments)
    config = moments.config
    gram = S.T @ S

    if kron is None:
        quartic, cross = _kron_traces_dense(moments, gram)
    else:
        _check_factorization(kron, moments)
        quartic, cross = _kron_traces_factorized(kron, gram)

    trace_CG = float(np.sum(moments.C * gram))
    trace_C = float(np.trace(moments.C))

    e_a2 = quartic - 2.0 * cross + moments.trace_M
    e_b2 = 4.0 * config.sigma_n2 * trace_CG
    e_c2 = moments.trace_N
    e_ac = config.seq_len * config.sigma_n2 * (trace_C - trace_CG)
    total = e_a2 + e_b2 + e_c2 - 2.0 * e_ac

    if total < -NEGATIVE_MSE_SLACK * max(1.0, moments.trace_M + e_c2):
        logging.warning("MSE evaluated to %s < 0; check the factorization", total)

    return MseBreakdown(e_a2=e_a2, e_b2=e_b2, e_c2=e_c2, e_ac=e_ac, total=total)


def objective(S, moments, kron=None):
    """Scalar J(S); shorthand for ``mse(S, moments, kron).total``"""

    return mse(S, moments, kron).total


def gradient(S, moments, kron):
    """Matrix gradient of J with respect to S

    Parameters
    ----------
    S : numpy.ndarray
        Sequence matrix of shape (seq_len, K)

    moments : MomentSet
        Moments of the problem

    kron : KronFactorization
        (Possibly truncated) factorization of `moments.Mmat`

    Returns
    -------
    grad : numpy.ndarray
        Delta1 - 2 Delta2 + (2 seq_len + 4) sigma_n2 (S C^T + S C), where

            Delta1 = grad tr{M (G (x) G)}
                   = sum_k sigma_k [tr{V_k G} S (U_k + U_k^T)
                                    + tr{U_k G} S (V_k + V_k^T)]
            Delta2 = grad tr{M (I (x) G)}
                   = sum_k sigma_k tr{U_k} S (V_k + V_k^T)

        For the symmetric factorization Delta1 reduces to
        2 sum_k tr{M_k G} S (M_k + M_k^T) and Delta2 to
        sum_k tr{M_k} S (M_k + M_k^T). The constant tr{M} contributes
        nothing.
    """

    S = check_sequence_matrix(S, moments)
    _check_factorization(kron, moments)
    config = moments.config
    gram = S.T @ S

    left_g = np.einsum("kij,ji->k", kron.left, gram)
    right_g = np.einsum("kij,ji->k", kron.right, gram)
    left_tr = np.einsum("kii->k", kron.left)

    # Delta1 - 2 Delta2 = S (H + H^T)
    H = np.einsum("k,kij->ij", kron.weights * right_g, kron.left) + np.einsum(
        "k,kij->ij", kron.weights * (left_g - 2.0 * left_tr), kron.right
    )

    C = moments.C
    noise_coeff = (2 * config.seq_len + 4) * config.sigma_n2

    return S @ (H + H.T) + noise_coeff * (S @ C.T + S @ C)


def mse_scale_profile(S0, moments):
    """Coefficients of the exact quartic J(gamma S0) = T1 gamma^4 + B gamma^2 + c0

    Parameters
    ----------
    S0 : numpy.ndarray
        Nonzero sequence matrix of shape (seq_len, K)

    moments : MomentSet
        Moments of the problem

    Returns
    -------
    quartic_coeff : float
        T1 = tr{M (G (x) G)} >= 0 with G = S0^T S0

    quadratic_coeff : float
        B = -2 tr{M (I (x) G)} + (2 seq_len + 4) sigma_n2 tr{C G}

    constant : float
        c0 = tr{M} + tr{N} - 2 seq_len sigma_n2 tr{C}, the value of J at S = 0
    """

    S0 = check_sequence_matrix(S0, moments)
    config = moments.config
    gram = S0.T @ S0

    quartic, cross = _kron_traces_dense(moments, gram)
    trace_CG = float(np.sum(moments.C * gram))
    trace_C = float(np.trace(moments.C))

    quadratic = -2.0 * cross + (2 * config.seq_len + 4) * config.sigma_n2 * trace_CG
    constant = (
        moments.trace_M
        + moments.trace_N
        - 2.0 * config.seq_len * config.sigma_n2 * trace_C
    )

    return max(quartic, 0.0), quadratic, constant
