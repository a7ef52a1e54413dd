"""Baseline sequence matrices: equiangular tight frames and random starts

Two real ETFs are constructed rather than tabulated:

- 3 x 6: the six diagonals of the regular icosahedron.
- 6 x 16: the regular two-graph on 16 vertices. Its Seidel matrix Q
  (switching class of the Clebsch graph) has eigenvalues 5 and -3, so
  G = I + Q / 3 is a rank-6 Gram matrix with unit diagonal and constant
  off-diagonal magnitude 1/3. The frame vectors come from the eigenspace
  projection of G.

Other shapes are read from files in the matrix text format.
"""

import logging
import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import lazy_loader as lazy

from aircomp.objective.objective import mse, mse_scale_profile
from aircomp.utils.errors import DomainError, StructureError, UnsupportedFrameError
from aircomp.utils.linalg import first_nonzero_positive
from aircomp.utils.matrix_io import load_matrix

np = lazy.load("numpy")

BUILTIN_3X6 = "builtin_3x6"
BUILTIN_6X16 = "builtin_6x16"
RANDOM = "random"

_BUILTIN_SHAPES = {(3, 6): BUILTIN_3X6, (6, 16): BUILTIN_6X16}

ETF_TOL = 1e-10


@dataclass(frozen=True)
class FrameSpec:
    """Where a baseline matrix of shape (seq_len, num_vectors) comes from

    Parameters
    ----------
    seq_len, num_vectors : int
        Shape of the frame matrix

    source : str
        "builtin_3x6", "builtin_6x16", "random", or a path to a matrix file

    seed : int, default=0
        Seed for the random source

    scale : float, default=1.0
        Expected column norm for the random source
    """

    seq_len: int
    num_vectors: int
    source: str
    seed: int = 0
    scale: float = 1.0

    @classmethod
    def builtin(cls, seq_len, num_vectors):
        """Spec for the builtin ETF of a shape

        Raises
        ------
        UnsupportedFrameError
            If no builtin ETF exists for (seq_len, num_vectors)
        """

        source = _BUILTIN_SHAPES.get((seq_len, num_vectors))
        if source is None:
            raise UnsupportedFrameError(
                f"No builtin ETF of shape {seq_len}x{num_vectors}; "
                f"builtins are {sorted(_BUILTIN_SHAPES)}. "
                "Supply the frame as a matrix file instead."
            )

        return cls(seq_len=seq_len, num_vectors=num_vectors, source=source)


@dataclass(frozen=True)
class EtfReport:
    """Result of `verify_etf`"""

    norm_deviation: float
    max_coherence: float
    min_coherence: float
    welch_bound: float
    tightness_residual: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class ScaledFrame:
    """Optimal point of J on the ray {gamma S0 : gamma >= 0}"""

    gamma: float
    S: object
    J: float


def welch_bound(seq_len, num_vectors):
    """Lower bound sqrt((K - M) / (M (K - 1))) on the coherence of K unit vectors"""

    if num_vectors <= seq_len:
        return 0.0

    return math.sqrt((num_vectors - seq_len) / (seq_len * (num_vectors - 1)))


def canonicalize(S):
    """Sign each column so its first nonzero entry is positive, then sort columns

    Columns are ordered lexicographically by their entries.
    """

    S = np.array(S, dtype=float)
    for k in range(S.shape[1]):
        S[:, k], _ = first_nonzero_positive(S[:, k])

    # np.lexsort sorts by the last key first
    order = np.lexsort(S[::-1])

    return S[:, order]


def _icosahedron_etf():
    golden = (1 + math.sqrt(5)) / 2
    lines = np.array(
        [
            [0.0, 1.0, golden],
            [0.0, 1.0, -golden],
            [1.0, golden, 0.0],
            [1.0, -golden, 0.0],
            [golden, 0.0, 1.0],
            [-golden, 0.0, 1.0],
        ]
    )

    return (lines / np.linalg.norm(lines, axis=1, keepdims=True)).T


def _clebsch_adjacency():
    """Folded 5-cube: F_2^4, adjacent at Hamming distance 1 or 4"""

    vertices = list(product((0, 1), repeat=4))
    n = len(vertices)
    A = np.zeros((n, n))
    for i, j in product(range(n), repeat=2):
        distance = sum(a != b for a, b in zip(vertices[i], vertices[j]))
        if distance in (1, 4):
            A[i, j] = 1.0

    return A


def _two_graph_etf(seq_len=6, num_vectors=16):
    A = _clebsch_adjacency()
    seidel = np.ones_like(A) - np.eye(num_vectors) - 2.0 * A

    alpha = welch_bound(seq_len, num_vectors)
    gram = np.eye(num_vectors) + alpha * seidel

    eigvals, eigvecs = np.linalg.eigh(gram)
    top = eigvecs[:, -seq_len:] * np.sqrt(eigvals[-seq_len:])

    return top.T


def build_etf(spec):
    """Construct a builtin equiangular tight frame

    Parameters
    ----------
    spec : FrameSpec
        Spec with source "builtin_3x6" or "builtin_6x16"

    Returns
    -------
    S : numpy.ndarray
        Canonicalized frame with unit-norm columns, coherence at the Welch
        bound and S S^T = (K / M) I

    Raises
    ------
    UnsupportedFrameError
        For any other source or shape
    """

    builders = {BUILTIN_3X6: _icosahedron_etf, BUILTIN_6X16: _two_graph_etf}
    builder = builders.get(spec.source)

    if builder is None or _BUILTIN_SHAPES.get((spec.seq_len, spec.num_vectors)) != (
        spec.source
    ):
        raise UnsupportedFrameError(
            f"Cannot build an ETF of shape {spec.seq_len}x{spec.num_vectors} from "
            f"source {spec.source!r}; supply the frame as a matrix file instead."
        )

    S = canonicalize(builder())

    report = verify_etf(S, ETF_TOL)
    if not report.passed:
        logging.warning("Builtin ETF %s failed verification: %s", spec.source, report)

    return S


def verify_etf(S, tol):
    """Check the defining properties of an equiangular tight frame

    Parameters
    ----------
    S : numpy.ndarray
        Frame matrix of shape (M, K), columns are the frame vectors

    tol : float
        Tolerance applied to every check

    Returns
    -------
    report : EtfReport
        Column-norm deviation from 1, largest and smallest off-diagonal
        coherence, the Welch bound, the tightness residual
        ||S S^T - (K / M) I||_F and whether all of them are within `tol`
    """

    S = np.asarray(S, dtype=float)
    M, K = S.shape

    norms = np.linalg.norm(S, axis=0)
    norm_deviation = float(np.max(np.abs(norms - 1.0)))

    gram = np.abs(S.T @ S)
    off_diag = gram[~np.eye(K, dtype=bool)]
    if off_diag.size:
        max_coherence = float(off_diag.max())
        min_coherence = float(off_diag.min())
    else:
        max_coherence = min_coherence = 0.0

    bound = welch_bound(M, K)
    tightness = float(np.linalg.norm(S @ S.T - (K / M) * np.eye(M)))

    passed = (
        norm_deviation <= tol
        and max_coherence - min_coherence <= tol
        and abs(max_coherence - bound) <= tol
        and tightness <= tol
    )

    return EtfReport(
        norm_deviation=norm_deviation,
        max_coherence=max_coherence,
        min_coherence=min_coherence,
        welch_bound=bound,
        tightness_residual=tightness,
        tol=tol,
        passed=passed,
    )


def optimal_scale(S0, moments):
    """Scale S0 to the minimizer of J along the ray gamma S0

    J(gamma S0) = T1 gamma^4 + B gamma^2 + c0 exactly, so the minimizer is
    gamma* = sqrt(max(0, -B / (2 T1))).

    Raises
    ------
    DomainError
        If S0 is zero
    StructureError
        If T1 = 0 while B < 0, i.e. J is unbounded below on the ray
    """

    S0 = np.asarray(S0, dtype=float)
    if not np.any(S0):
        raise DomainError("Cannot scale the zero matrix")

    quartic, quadratic, _ = mse_scale_profile(S0, moments)

    if quadratic >= 0:
        gamma = 0.0
    elif quartic > 0:
        gamma = math.sqrt(-quadratic / (2.0 * quartic))
    else:
        raise StructureError(
            f"Scaling quartic is unbounded below: T1={quartic}, B={quadratic}"
        )

    S_scaled = gamma * S0
    J_scaled = mse(S_scaled, moments).total
    logging.debug("Optimal scale gamma=%s gives J=%s", gamma, J_scaled)

    return ScaledFrame(gamma=gamma, S=S_scaled, J=J_scaled)


def random_init(seq_len, num_nodes, scale=1.0, seed=0):
    """I.i.d. Gaussian matrix with entry standard deviation scale / sqrt(seq_len)

    Columns then have expected squared norm scale^2.
    """

    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale}")

    rng = np.random.default_rng(seed)
    return rng.normal(0.0, scale / math.sqrt(seq_len), size=(seq_len, num_nodes))


def frame_from_spec(spec):
    """Resolve any FrameSpec source to a matrix"""

    if spec.source in (BUILTIN_3X6, BUILTIN_6X16):
        return build_etf(spec)

    if spec.source == RANDOM:
        return random_init(spec.seq_len, spec.num_vectors, spec.scale, spec.seed)

    S = load_matrix(Path(spec.source))
    if S.shape != (spec.seq_len, spec.num_vectors):
        raise UnsupportedFrameError(
            f"{spec.source} holds a {S.shape} matrix, "
            f"expected {(spec.seq_len, spec.num_vectors)}"
        )

    return S
