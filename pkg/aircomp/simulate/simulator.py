"""Monte Carlo estimation of the MSE of the transmission and detection chain

Each sample draws sensor values x ~ N(0, sigma_x2 I_K) and noise
n ~ N(0, sigma_n2 I_M), forms the received signal S phi(x) + n, applies the
energy detector and records the squared error against f(x) = ||x||_p^p.

Samples are generated in fixed blocks of BLOCK_SIZE; block b draws from a
stream seeded by (seed, b). Chunks group whole blocks for execution, so
the sample set and the order in which block statistics are combined do not
depend on the chunk size or on the number of threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial

import lazy_loader as lazy

from aircomp.utils.errors import DimensionError

np = lazy.load("numpy")

BLOCK_SIZE = 4096


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo protocol

    Parameters
    ----------
    num_samples : int, default=100000
        Number of independent (x, n) draws

    seed : int, default=0
        Root seed of the per-block streams

    chunk_size : int, default=65536
        Samples per execution chunk, rounded up to whole blocks

    threads : int, default=1
        Threads used to evaluate chunks
    """

    num_samples: int = 100_000
    seed: int = 0
    chunk_size: int = 65_536
    threads: int = 1

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be positive, got {self.num_samples}")

        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be positive, got {self.chunk_size}")

        if self.threads < 1:
            raise ValueError(f"threads must be positive, got {self.threads}")


@dataclass(frozen=True)
class McEstimate:
    """Empirical MSE with the standard error of the sample mean"""

    mean_sq_error: float
    std_error: float
    num_samples: int


def lp_target(x, p):
    """Desired function value f(x) = ||x||_p^p along the last axis"""

    return np.sum(np.abs(x) ** p, axis=-1)


def preprocess(x, p):
    """Pre-processing map phi(x) = |x|^(p/2), elementwise; 0 maps to 0"""

    return np.abs(np.asarray(x, dtype=float)) ** (p / 2)


def detect(S, x, n, p):
    """Energy detector output ||S phi(x) + n||^2

    Parameters
    ----------
    S : numpy.ndarray
        Sequence matrix of shape (seq_len, K)

    x : numpy.ndarray
        Sensor values of length K

    n : numpy.ndarray
        Receiver noise of length seq_len

    p : float
        Norm exponent used by the pre-processing

    Returns
    -------
    f_hat : float
        Received energy
    """

    S = np.asarray(S, dtype=float)
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)

    if x.shape != (S.shape[1],) or n.shape != (S.shape[0],):
        raise DimensionError(
            f"S has shape {S.shape} but x has shape {x.shape} and n has shape {n.shape}"
        )

    y = S @ preprocess(x, p) + n

    return float(y @ y)


def _block_statistics(block, S, config, mc):
    """Count, mean and sum of squared deviations of one block's squared errors"""

    start = block * BLOCK_SIZE
    count = min(BLOCK_SIZE, mc.num_samples - start)

    rng = np.random.default_rng(np.random.SeedSequence(mc.seed, spawn_key=(block,)))
    x = rng.normal(0.0, math.sqrt(config.sigma_x2), size=(count, config.num_nodes))
    n = rng.normal(0.0, math.sqrt(config.sigma_n2), size=(count, config.seq_len))

    y = preprocess(x, config.p) @ S.T + n
    f_hat = np.sum(y * y, axis=1)
    sq_error = (lp_target(x, config.p) - f_hat) ** 2

    mean = math.fsum(sq_error) / count
    m2 = math.fsum((sq_error - mean) ** 2)

    return count, mean, m2


def _chunk_statistics(blocks, S, config, mc):
    return [_block_statistics(b, S, config, mc) for b in blocks]


def _combine(stats):
    """Merge per-block (count, mean, M2) in the given order"""

    total, mean, m2 = 0, 0.0, 0.0
    for count, block_mean, block_m2 in stats:
        delta = block_mean - mean
        merged = total + count
        mean += delta * count / merged
        m2 += block_m2 + delta * delta * total * count / merged
        total = merged

    return total, mean, m2


def empirical_mse(S, config, mc=None):
    """Monte Carlo estimate of E[(f(x) - f_hat)^2]

    Parameters
    ----------
    S : numpy.ndarray
        Sequence matrix of shape (seq_len, K)

    config : SystemConfig
        Dimensions, exponent and variances of the problem

    mc : McConfig, default=None
        Sample count, seed and chunking; defaults to McConfig()

    Returns
    -------
    estimate : McEstimate
        Sample mean of the squared errors and its standard error
        (sample standard deviation / sqrt(num_samples))
    """

    if mc is None:
        mc = McConfig()

    S = np.asarray(S, dtype=float)
    if S.shape != (config.seq_len, config.num_nodes):
        raise DimensionError(
            f"Sequence matrix has shape {S.shape}, "
            f"expected {(config.seq_len, config.num_nodes)}"
        )

    num_blocks = -(-mc.num_samples // BLOCK_SIZE)
    blocks_per_chunk = max(1, -(-mc.chunk_size // BLOCK_SIZE))
    chunks = [
        range(start, min(start + blocks_per_chunk, num_blocks))
        for start in range(0, num_blocks, blocks_per_chunk)
    ]

    run_chunk = partial(_chunk_statistics, S=S, config=config, mc=mc)
    if mc.threads > 1:
        with ThreadPoolExecutor(max_workers=mc.threads) as pool:
            per_chunk = list(pool.map(run_chunk, chunks))
    else:
        per_chunk = [run_chunk(chunk) for chunk in chunks]

    stats = [block for chunk in per_chunk for block in chunk]
    total, mean, m2 = _combine(stats)

    variance = m2 / (total - 1) if total > 1 else 0.0
    std_error = math.sqrt(max(variance, 0.0) / total)

    logging.debug(
        "Monte Carlo MSE over %s samples in %s chunks: %s +/- %s",
        total,
        len(chunks),
        mean,
        std_error,
    )

    return McEstimate(mean_sq_error=mean, std_error=std_error, num_samples=total)
