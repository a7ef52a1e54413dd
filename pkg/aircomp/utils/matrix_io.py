"""Utility functions for reading and writing sequence matrices as text

The format is a header line with two integers ``seq_len K`` followed by
``seq_len`` lines of ``K`` whitespace-separated floats. Floats are written
with 17 significant digits so that a save/load cycle is bit exact.
"""

import logging
from pathlib import Path

import lazy_loader as lazy

from aircomp.utils.errors import DimensionError

np = lazy.load("numpy")

FLOAT_FORMAT = "%.16e"


def save_matrix(S, path):
    """Write a sequence matrix in the text format

    Parameters
    ----------
    S : numpy.ndarray
        Real matrix of shape (seq_len, K)

    path : str or pathlib.Path
        Output file. Parent directories are created if necessary.

    Returns
    -------
    path : pathlib.Path
        The path that was written
    """

    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.ndim != 2:
        raise DimensionError(f"Expected a 2-d matrix, got shape {S.shape}")

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(
            path,
            S,
            fmt=FLOAT_FORMAT,
            header=f"{S.shape[0]} {S.shape[1]}",
            comments="",
        )
    except OSError as err:
        raise OSError(f"Could not write matrix to {path}: {err}") from err

    logging.debug("Saved %s matrix to %s", S.shape, path)

    return path


def load_matrix(path):
    """Read a sequence matrix written by `save_matrix`

    Parameters
    ----------
    path : str or pathlib.Path
        Input file in the matrix text format

    Returns
    -------
    S : numpy.ndarray
        Matrix of shape (seq_len, K) as declared in the header

    Raises
    ------
    DimensionError
        If the body does not match the header dimensions
    """

    path = Path(path)
    try:
        with open(path) as f:
            header = f.readline().split()
            body = np.loadtxt(f, dtype=float, ndmin=2)
    except OSError as err:
        raise OSError(f"Could not read matrix from {path}: {err}") from err

    if len(header) != 2:
        raise DimensionError(f"{path}: header must hold 'seq_len K', got {header}")

    seq_len, num_nodes = (int(x) for x in header)
    if body.shape != (seq_len, num_nodes):
        raise DimensionError(
            f"{path}: header declares {(seq_len, num_nodes)}, body has {body.shape}"
        )

    return body
