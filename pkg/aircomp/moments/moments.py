"""Closed-form Gaussian moments entering the MSE of the energy detector

With sensor values x ~ N(0, sigma_x2 I_K), pre-processing
phi(x) = |x|^(p/2) and noise n ~ N(0, sigma_n2 I_M), the MSE depends on
the signal statistics only through

    C = E[phi phi^T]                              (K x K)
    M = E[vec{phi phi^T} vec{phi phi^T}^T]        (K^2 x K^2)
    tr{N} = E[(n^T n)^2]                          (scalar)

Every entry of C and M is an absolute monomial moment Q(alpha) of the
Gaussian vector, and every entry of N is a central monomial moment I(beta).
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import product

import lazy_loader as lazy

from aircomp.kron.kron import rearrange
from aircomp.utils.errors import DimensionError, DomainError, StructureError
from aircomp.utils.linalg import rel_frobenius

np = lazy.load("numpy")

P_MIN = 1e-6
P_MAX = 64.0

# Dense K^2 x K^2 storage bound
MAX_NODES = 32

# Tolerance on R(M) = M before the moment set is rejected
REARRANGE_TOL = 1e-12


@dataclass(frozen=True)
class SystemConfig:
    """Problem dimensions and signal/noise statistics

    Parameters
    ----------
    num_nodes : int
        Number of sensor nodes K

    seq_len : int
        Length of the transmit sequences (rows of S)

    p : float
        Exponent of the l_p (pseudo)norm, restricted to [1e-6, 64]

    sigma_x2 : float, default=1.0
        Variance of the i.i.d. sensor values

    sigma_n2 : float, default=0.0
        Variance of the i.i.d. receiver noise
    """

    num_nodes: int
    seq_len: int
    p: float
    sigma_x2: float = 1.0
    sigma_n2: float = 0.0

    def __post_init__(self):
        if int(self.num_nodes) != self.num_nodes or self.num_nodes < 1:
            raise ValueError(
                f"num_nodes must be a positive integer, got {self.num_nodes}"
            )

        if int(self.seq_len) != self.seq_len or self.seq_len < 1:
            raise ValueError(
                f"seq_len must be a positive integer, got {self.seq_len}"
            )

        object.__setattr__(self, "num_nodes", int(self.num_nodes))
        object.__setattr__(self, "seq_len", int(self.seq_len))

        if not (P_MIN <= self.p <= P_MAX):
            raise DomainError(
                f"p={self.p} outside the supported range [{P_MIN}, {P_MAX}]"
            )

        if not (self.sigma_x2 > 0 and math.isfinite(self.sigma_x2)):
            raise DomainError(
                f"sigma_x2 must be positive and finite, got {self.sigma_x2}"
            )

        if not (self.sigma_n2 >= 0 and math.isfinite(self.sigma_n2)):
            raise DomainError(
                f"sigma_n2 must be nonnegative and finite, got {self.sigma_n2}"
            )


@dataclass(frozen=True, eq=False)
class MomentSet:
    """The matrices C, M and the scalar tr{N} for one SystemConfig"""

    C: object
    Mmat: object
    trace_N: float
    config: SystemConfig
    trace_M: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "trace_M", float(np.trace(self.Mmat)))
        self.C.setflags(write=False)
        self.Mmat.setflags(write=False)


def _log_abs_moment_1d(alpha, sigma2):
    """log E|x|^alpha for scalar x ~ N(0, sigma2); alpha may be an array"""

    from scipy.special import gammaln

    alpha = np.asarray(alpha, dtype=float)
    return (
        0.5 * alpha * np.log(2.0 * sigma2)
        + gammaln((alpha + 1.0) / 2.0)
        - 0.5 * np.log(np.pi)
    )


def abs_moment(alpha, sigma_x2):
    """Absolute monomial moment Q(alpha) = E[prod_k |x_k|^alpha_k]

    Parameters
    ----------
    alpha : array_like
        Nonnegative exponents, one per coordinate of x ~ N(0, sigma_x2 I)

    sigma_x2 : float
        Variance of each coordinate

    Returns
    -------
    moment : float
        (2 sigma_x2)^(sum(alpha)/2) / sqrt(pi)^K * prod Gamma((alpha_k+1)/2)

    Raises
    ------
    DomainError
        If an exponent is negative or not finite

    Notes
    -----
    Evaluated in log form so that large exponent sums do not overflow the
    intermediate Gamma values. Zero exponents contribute an exact factor of
    one and are skipped, so the empty and all-zero vectors give exactly 1.
    """

    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if not np.all(np.isfinite(alpha)) or np.any(alpha < 0):
        raise DomainError(f"Exponents must be finite and nonnegative, got {alpha}")

    if not sigma_x2 > 0:
        raise DomainError(f"sigma_x2 must be positive, got {sigma_x2}")

    alpha = alpha[alpha > 0]
    if alpha.size == 0:
        return 1.0

    return float(np.exp(np.sum(_log_abs_moment_1d(alpha, sigma_x2))))


def central_moment(beta, sigma_n2):
    """Central monomial moment I(beta) = E[prod_m n_m^beta_m]

    Zero whenever some exponent is odd, otherwise the absolute moment of
    the same exponent vector.

    Raises
    ------
    DomainError
        If an exponent is negative or not an integer
    """

    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if (
        not np.all(np.isfinite(beta))
        or np.any(beta < 0)
        or np.any(beta != np.round(beta))
    ):
        raise DomainError(f"Exponents must be nonnegative integers, got {beta}")

    if np.any(beta % 2 == 1):
        return 0.0

    if sigma_n2 < 0:
        raise DomainError(f"sigma_n2 must be nonnegative, got {sigma_n2}")

    # Degenerate noise: only the empty monomial survives
    if sigma_n2 == 0:
        return 1.0 if np.all(beta == 0) else 0.0

    return abs_moment(beta, sigma_n2)


def build_C(config):
    """Second-moment matrix C = E[phi(x) phi(x)^T]

    Diagonal entries are Q(p) at one index; off-diagonal entries put p/2 at
    two distinct indices, which factorizes as Q(p/2)^2.
    """

    K = config.num_nodes
    diag = abs_moment([config.p], config.sigma_x2)
    off = abs_moment([config.p / 2, config.p / 2], config.sigma_x2)

    C = np.full((K, K), off)
    np.fill_diagonal(C, diag)

    return C


def moment_tensor(config):
    """Fourth-order tensor T[i,j,k,l] = E[phi_i phi_j phi_k phi_l]

    Each entry is Q(alpha) with alpha placing p/2 at each of i, j, k, l
    with multiplicity. The entry only depends on how often each node index
    occurs, so the log-moment is accumulated node by node from a table of
    the five possible multiplicities.
    """

    K = config.num_nodes
    if K > MAX_NODES:
        raise DimensionError(
            f"num_nodes={K} exceeds the dense K^2 x K^2 bound of {MAX_NODES}"
        )

    half = config.p / 2
    log_table = _log_abs_moment_1d(half * np.arange(5), config.sigma_x2)
    log_table[0] = 0.0

    idx = np.indices((K,) * 4)
    log_T = np.zeros((K,) * 4)
    for node in range(K):
        log_T += log_table[np.sum(idx == node, axis=0)]

    return np.exp(log_T)


def build_M(config):
    """Fourth-moment matrix M = E[vec{phi phi^T} vec{phi phi^T}^T]

    Row (i, j) and column (k, l) follow the column-major vec ordering,
    i.e. row index i + K j. The moment tensor is fully symmetric, so M is
    symmetric and invariant under the block rearrangement.
    """

    K = config.num_nodes
    T = moment_tensor(config)

    return T.reshape(K * K, K * K, order="F")


def trace_N(config):
    """tr{N} = E[(n^T n)^2] = seq_len (seq_len + 2) sigma_n2^2"""

    M = config.seq_len
    return float(M * (M + 2) * config.sigma_n2**2)


def assemble_N(config):
    """Dense N = E[vec{n n^T} vec{n n^T}^T], assembled entrywise from I(beta)

    Only meant for cross-checking `trace_N` on small sequence lengths; the
    main path never materializes N.
    """

    M = config.seq_len
    N = np.zeros((M * M, M * M))
    for i, j, k, l in product(range(M), repeat=4):
        beta = np.zeros(M, dtype=int)
        for m in (i, j, k, l):
            beta[m] += 1
        N[i + M * j, k + M * l] = central_moment(beta, config.sigma_n2)

    return N


def trace_N_entrywise(config):
    """Sum of the diagonal of N, one I(beta) evaluation per entry"""

    M = config.seq_len
    total = 0.0
    for i, j in product(range(M), repeat=2):
        beta = np.zeros(M, dtype=int)
        beta[i] += 2
        beta[j] += 2
        total += central_moment(beta, config.sigma_n2)

    return total


def build_moments(config):
    """Assemble the MomentSet of a SystemConfig

    Raises
    ------
    StructureError
        If the assembled M is not invariant under the block rearrangement
    """

    C = build_C(config)
    Mmat = build_M(config)

    residual = rel_frobenius(rearrange(Mmat), Mmat)
    if residual > REARRANGE_TOL:
        raise StructureError(
            f"Moment matrix violates R(M) = M: relative residual {residual:.3e}"
        )

    logging.debug(
        "Built moments for K=%s, p=%s: tr{C}=%s, tr{M}=%s",
        config.num_nodes,
        config.p,
        np.trace(C),
        np.trace(Mmat),
    )

    return MomentSet(C=C, Mmat=Mmat, trace_N=trace_N(config), config=config)
