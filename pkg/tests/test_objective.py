from itertools import product

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import ortho_group

from aircomp.kron.kron import kron_decompose, kron_decompose_symmetric
from aircomp.objective.objective import (
    check_sequence_matrix,
    gradient,
    kron_trace,
    mse,
    mse_scale_profile,
    objective,
)
from aircomp.utils.errors import DimensionError, DomainError


def _scalar_mse(s, sigma_n2):
    noise = 4 * sigma_n2 * s**2 + 3 * sigma_n2**2 - 2 * sigma_n2 * (1 - s**2)
    return 3 * (1 - s**2) ** 2 + noise


def _finite_difference(S, moments, step=1e-5):
    grad = np.zeros_like(S)
    for idx in np.ndindex(S.shape):
        E = np.zeros_like(S)
        E[idx] = step
        grad[idx] = (objective(S + E, moments) - objective(S - E, moments)) / (2 * step)
    return grad


def test_noiseless_orthonormal_is_exact(make_problem, rng):
    moments, kron = make_problem(4, 4, p=1.3)
    S = ortho_group.rvs(4, random_state=1)

    zero = pytest.approx(0.0, abs=1e-12 * moments.trace_M)
    assert mse(S, moments).total == zero
    assert mse(S, moments, kron).total == zero


def test_zero_matrix_value(make_problem):
    moments, kron = make_problem(3, 2, p=1.5, sigma_x2=1.2, sigma_n2=0.3)
    config = moments.config

    expected = (
        moments.trace_M
        + moments.trace_N
        - 2 * config.seq_len * config.sigma_n2 * np.trace(moments.C)
    )

    S = np.zeros((2, 3))
    assert objective(S, moments) == pytest.approx(expected, rel=1e-12)
    assert objective(S, moments, kron) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 1.7])
@pytest.mark.parametrize("sigma_n2", [0.0, 0.1])
def test_scalar_closed_form(make_problem, s, sigma_n2):
    moments, kron = make_problem(1, 1, p=2.0, sigma_n2=sigma_n2)

    S = np.array([[s]])

    expected = pytest.approx(_scalar_mse(s, sigma_n2), rel=1e-12, abs=1e-14)

    assert objective(S, moments) == expected
    assert objective(S, moments, kron) == expected


def test_scalar_example_value(make_problem):
    moments, _ = make_problem(1, 1, p=2.0, sigma_n2=0.1)
    assert objective(np.array([[1.0]]), moments) == pytest.approx(0.43, rel=1e-12)


def test_breakdown_combines_terms(make_problem, rng):
    moments, _ = make_problem(3, 2, p=1.0, sigma_n2=0.2)

    terms = mse(rng.normal(size=(2, 3)), moments)

    assert terms.total == pytest.approx(
        terms.e_a2 + terms.e_b2 + terms.e_c2 - 2 * terms.e_ac, rel=1e-14
    )
    assert terms.e_c2 == pytest.approx(moments.trace_N)


@pytest.mark.parametrize("K, seq_len", [(3, 2), (6, 3), (16, 6)])
@pytest.mark.parametrize("p", [0.25, 1.0, 4.0])
def test_dense_and_factorized_agree(make_problem, rng, K, seq_len, p):
    moments, kron = make_problem(K, seq_len, p=p, sigma_n2=0.01)
    S = rng.normal(size=(seq_len, K)) / np.sqrt(seq_len)

    dense = objective(S, moments)
    factorized = objective(S, moments, kron)

    assert factorized == pytest.approx(dense, rel=1e-9)


def test_kron_trace_matches_definition(make_problem, rng):
    moments, _ = make_problem(3, 1, p=1.0)
    A = rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 3))

    expected = np.trace(moments.Mmat @ np.kron(A, B))

    assert kron_trace(moments.Mmat, A, B) == pytest.approx(expected, rel=1e-12)


def test_mse_nonnegative(make_problem, rng):
    moments, kron = make_problem(6, 3, p=0.5, sigma_n2=1e-3)
    for _ in range(20):
        S = rng.normal(size=(3, 6)) * rng.uniform(0.01, 3.0)
        assert objective(S, moments, kron) >= -1e-9


def test_left_orthogonal_invariance(make_problem, rng):
    moments, _ = make_problem(6, 3, p=1.5, sigma_n2=0.1)
    S = rng.normal(size=(3, 6))
    Q = ortho_group.rvs(3, random_state=7)

    assert objective(Q @ S, moments) == pytest.approx(objective(S, moments), rel=1e-12)


def test_gradient_at_zero_is_zero(make_problem):
    moments, kron = make_problem(3, 2, p=1.0, sigma_n2=0.1)
    assert_allclose(gradient(np.zeros((2, 3)), moments, kron), 0.0)


@pytest.mark.parametrize("s", [0.3, 0.9, 1.4])
@pytest.mark.parametrize("sigma_n2", [0.0, 0.1])
def test_gradient_scalar_closed_form(make_problem, s, sigma_n2):
    moments, kron = make_problem(1, 1, p=2.0, sigma_n2=sigma_n2)

    expected = -12 * s * (1 - s**2) + 8 * sigma_n2 * s + 4 * sigma_n2 * s

    grad = gradient(np.array([[s]]), moments, kron)
    assert grad[0, 0] == pytest.approx(expected, rel=1e-12)


_GRADIENT_CASES = [
    (seed, *case)
    for seed, case in enumerate(
        product((3, 6), (2, 3), (0.25, 1.0, 2.0, 4.0), (1e-3, 0.1))
    )
]


@pytest.mark.parametrize("seed, K, seq_len, p, sigma_n2", _GRADIENT_CASES)
def test_gradient_matches_finite_differences(
    make_problem, seed, K, seq_len, p, sigma_n2
):
    rng = np.random.default_rng(seed)
    moments, kron = make_problem(K, seq_len, p=p, sigma_x2=1.0, sigma_n2=sigma_n2)
    S = rng.normal(size=(seq_len, K)) / np.sqrt(seq_len)

    analytic = gradient(S, moments, kron)
    numeric = _finite_difference(S, moments)

    assert np.linalg.norm(analytic - numeric) < 1e-5 * np.linalg.norm(numeric)


def test_gradient_with_unsymmetrized_factorization(make_problem, rng):
    moments, _ = make_problem(3, 2, p=1.0, sigma_n2=0.1)
    kron = kron_decompose(moments.Mmat)
    S = rng.normal(size=(2, 3))

    sym = gradient(S, moments, kron_decompose_symmetric(moments.Mmat))

    assert_allclose(gradient(S, moments, kron), sym, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0, 2.0])
def test_scale_profile_is_exact_quartic(make_problem, rng, gamma):
    moments, _ = make_problem(6, 3, p=1.0, sigma_n2=1e-3)
    S0 = rng.normal(size=(3, 6))

    quartic, quadratic, constant = mse_scale_profile(S0, moments)
    predicted = quartic * gamma**4 + quadratic * gamma**2 + constant

    assert quartic >= 0
    assert objective(gamma * S0, moments) == pytest.approx(predicted, rel=1e-9)


def test_scale_profile_noiseless_orthonormal(make_problem):
    moments, _ = make_problem(3, 3, p=2.0)

    quartic, quadratic, constant = mse_scale_profile(np.eye(3), moments)

    assert quartic + quadratic + constant == pytest.approx(0.0, abs=1e-12)
    assert -quadratic / (2 * quartic) == pytest.approx(1.0)


def test_check_sequence_matrix(make_problem):
    moments, _ = make_problem(3, 2, p=1.0)

    with pytest.raises(DimensionError):
        check_sequence_matrix(np.zeros((3, 2)), moments)

    with pytest.raises(DomainError):
        check_sequence_matrix(np.full((2, 3), np.nan), moments)


def test_factorization_dimension_mismatch(make_problem):
    moments, _ = make_problem(3, 2, p=1.0)
    _, other = make_problem(2, 2, p=1.0)

    with pytest.raises(DimensionError):
        objective(np.zeros((2, 3)), moments, other)
