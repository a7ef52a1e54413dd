import numpy as np
import pytest
from numpy.testing import assert_allclose

from aircomp.utils.errors import DimensionError
from aircomp.utils.linalg import (
    first_nonzero_positive,
    kron_side,
    max_column_power,
    rel_frobenius,
    square_side,
    total_power,
    unvec,
    vec,
)


def test_vec_is_column_major():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert_allclose(vec(A), [1.0, 3.0, 2.0, 4.0])
    assert_allclose(unvec(vec(A)), A)


def test_unvec_with_rows(rng):
    A = rng.normal(size=(2, 5))
    assert_allclose(unvec(vec(A), rows=2), A)


@pytest.mark.parametrize("n, side", [(1, 1), (4, 2), (36, 6), (256, 16)])
def test_square_side(n, side):
    assert square_side(n) == side


@pytest.mark.parametrize("n", [0, 2, 8, 35])
def test_square_side_rejects_non_squares(n):
    with pytest.raises(DimensionError):
        square_side(n)


def test_kron_side_rejects_rectangular():
    with pytest.raises(DimensionError):
        kron_side(np.zeros((4, 9)))


def test_rel_frobenius():
    B = np.eye(2)
    assert rel_frobenius(2 * B, B) == pytest.approx(1.0)
    assert rel_frobenius(B, np.zeros((2, 2))) == pytest.approx(np.sqrt(2))


@pytest.mark.parametrize(
    "v, expected, sign",
    [
        ([0.0, -2.0, 1.0], [0.0, 2.0, -1.0], -1.0),
        ([1e-20, 3.0], [1e-20, 3.0], 1.0),
        ([0.0, 0.0], [0.0, 0.0], 1.0),
    ],
)
def test_first_nonzero_positive(v, expected, sign):
    flipped, used = first_nonzero_positive(np.array(v))
    assert_allclose(flipped, expected)
    assert used == sign


def test_power_measures():
    S = np.array([[1.0, 0.0, 2.0], [1.0, 3.0, 0.0]])
    assert total_power(S) == pytest.approx(15.0)
    assert max_column_power(S) == pytest.approx(9.0)
