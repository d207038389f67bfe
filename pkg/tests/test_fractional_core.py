import numpy as np
import pytest
from scipy.special import gamma

from fracvqa.core.errors import UsageError
from fracvqa.solver.fractional_core import (
    Boundary,
    build_crank_nicolson,
    build_system_matrix,
    compute_weights,
    history_coefficients,
    is_power_of_two,
    truncation_error_estimate,
)

ALPHA_GRID = [round(0.05 * i, 2) for i in range(1, 21)]


@pytest.mark.parametrize("alpha", ALPHA_GRID)
def test_weight_identities(alpha):
    w = compute_weights(alpha, 1.0 / 64, 64)
    assert w.weight(1) == 1.0
    partial = np.cumsum(w.w)
    k = np.arange(1, 65, dtype=float)
    np.testing.assert_allclose(partial, k ** (1.0 - alpha), rtol=0, atol=1e-12)
    assert w.g == pytest.approx((1.0 / 64) ** (-alpha) / gamma(2.0 - alpha), rel=1e-14)


def test_weights_are_decreasing_for_fractional_order():
    w = compute_weights(0.5, 0.1, 20)
    assert np.all(np.diff(w.w) < 0)
    assert w.delta(3) == pytest.approx(w.weight(4) - w.weight(3))
    # fora da tabela vale a forma fechada
    assert w.weight(25) == pytest.approx(25 ** 0.5 - 24 ** 0.5)


def test_alpha_one_collapses_to_backward_euler():
    w = compute_weights(1.0, 0.1, 10)
    assert w.g == pytest.approx(10.0)
    for k in range(1, 11):
        coeffs = history_coefficients(w, k)
        assert coeffs.terms == ((k - 1, 1.0),)


@pytest.mark.parametrize("alpha,tau,M", [(0.0, 0.1, 4), (1.5, 0.1, 4), (0.5, 0.0, 4), (0.5, 0.1, 0)])
def test_weights_reject_bad_arguments(alpha, tau, M):
    with pytest.raises(UsageError):
        compute_weights(alpha, tau, M)


def test_history_coefficients_sum_to_one():
    w = compute_weights(0.3, 0.05, 16)
    for k in range(1, 17):
        coeffs = history_coefficients(w, k)
        assert sum(c for _, c in coeffs.terms) == pytest.approx(1.0, abs=1e-12)
        assert coeffs.terms[0][0] == k - 1


def test_history_combine():
    w = compute_weights(0.5, 0.1, 4)
    states = [np.full(3, float(m + 1)) for m in range(3)]
    coeffs = history_coefficients(w, 3)
    expected = sum(c * states[m] for m, c in coeffs.terms)
    np.testing.assert_allclose(coeffs.combine(states), expected)


def test_truncation_keeps_recent_terms():
    w = compute_weights(0.5, 0.1, 16)
    full = history_coefficients(w, 10)
    truncated = history_coefficients(w, 10, xi=4)
    assert truncated.terms == full.terms[:4]
    assert history_coefficients(w, 10, xi=16).terms == full.terms


def test_history_coefficients_validate_k():
    w = compute_weights(0.5, 0.1, 4)
    with pytest.raises(UsageError):
        history_coefficients(w, 0)
    with pytest.raises(UsageError):
        history_coefficients(w, 5)
    with pytest.raises(UsageError):
        history_coefficients(w, 2, xi=9)


def test_truncation_error_estimate():
    w = compute_weights(0.5, 0.1, 16)
    norms = [2.0, 1.5, 1.0, 0.8, 0.7]
    assert truncation_error_estimate(w, 5, norms) == 0.0
    expected = w.g * abs(w.delta(3)) * norms[5 - 3]
    assert truncation_error_estimate(w, 2, norms) == pytest.approx(expected)


@pytest.mark.parametrize("boundary", list(Boundary))
def test_system_matrix_dense_and_matvec_agree(boundary, rng):
    A = build_system_matrix(8, 3.0, boundary)
    x = rng.normal(size=8)
    np.testing.assert_allclose(A.matvec(x), A.dense() @ x, atol=1e-12)
    dense = A.dense()
    np.testing.assert_allclose(dense, dense.T)
    assert dense[3, 3] == A.b == 1.0 + 6.0
    assert dense[3, 4] == -3.0


def test_system_matrix_corners():
    a = 2.0
    periodic = build_system_matrix(4, a, "periodic").dense()
    dirichlet = build_system_matrix(4, a, "dirichlet").dense()
    neumann = build_system_matrix(4, a, "neumann").dense()
    assert periodic[0, -1] == -a and periodic[0, 0] == 1 + 2 * a
    assert dirichlet[0, -1] == 0.0 and dirichlet[0, 0] == 1 + 2 * a
    assert neumann[0, -1] == 0.0 and neumann[0, 0] == 1 + a
    # Neumann conserva a soma: colunas de A - I somam zero
    np.testing.assert_allclose((neumann - np.eye(4)).sum(axis=0), 0.0, atol=1e-12)


def test_periodic_two_points_accumulates_both_neighbours():
    A = build_system_matrix(2, 1.0, "periodic").dense()
    np.testing.assert_allclose(A, [[3.0, -2.0], [-2.0, 3.0]])


def test_system_matrix_validation():
    assert is_power_of_two(16) and not is_power_of_two(12)
    with pytest.raises(UsageError):
        build_system_matrix(6, 1.0, "dirichlet")
    with pytest.raises(UsageError):
        build_system_matrix(1, 1.0, "dirichlet")
    with pytest.raises(UsageError):
        build_system_matrix(4, -1.0, "dirichlet")


@pytest.mark.parametrize("boundary", list(Boundary))
def test_crank_nicolson_pair(boundary):
    pair = build_crank_nicolson(8, 4.0, boundary)
    np.testing.assert_allclose(pair.A.dense() + pair.B.dense(), np.eye(8), atol=1e-12)
    implicit = build_system_matrix(8, 4.0, boundary).dense()
    np.testing.assert_allclose(2 * pair.A.dense() - np.eye(8), implicit, atol=1e-12)
