import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popgp.errors import InvalidInputError, NotPositiveDefiniteError, NumericalError
from popgp.kernel import (
    CovarianceMatrix,
    build_ktilde,
    chol_solve_logdet,
    dktilde_dphi,
    factorize,
    sek,
)

REF_THETA = np.array([0.0001, 0.1, 0.25, 0.0, 0.1, 0.5])


def scalar_sek(a, b, theta):
    s = 0.0
    for q in range(len(a)):
        s += theta[q + 2] * (a[q] - b[q]) ** 2
    return theta[1] * math.exp(-s)


def brute_ktilde(X, theta):
    M = len(X)
    K = np.empty((M, M))
    for i in range(M):
        for j in range(M):
            K[i, j] = scalar_sek(X[i], X[j], theta) + (theta[0] if i == j else 0.0)
    return K


def gauss_solve(A, b):
    """Textbook Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for k in range(n):
        p = k + np.argmax(np.abs(A[k:, k]))
        A[[k, p]] = A[[p, k]]
        b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            f = A[i, k] / A[k, k]
            A[i, k:] -= f * A[k, k:]
            b[i] -= f * b[k]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - A[i, i + 1 :] @ x[i + 1 :]) / A[i, i]
    return x


class TestSek:
    def test_identical_inputs_give_vertical_scale(self):
        x = np.array([1.0, 0.0, 1.0, -0.3])
        assert sek(x, x, REF_THETA) == 0.1

    def test_vanishing_scales(self):
        theta = np.array([1e-4, 0.1, 1e-300, 1e-300, 1e-300, 1e-300])
        assert sek([1, 1, 0, 0], [0, 1, 0, 5], theta) == pytest.approx(0.1, rel=1e-15)

    def test_reference_parameters(self):
        xi, xj = [1, 1, 0, 0], [0, 1, 0, 1]
        expected = 0.1 * math.exp(-0.75)
        assert sek(xi, xj, REF_THETA) == pytest.approx(expected, rel=1e-15)
        assert sek(xi, xj, REF_THETA) == pytest.approx(scalar_sek(xi, xj, REF_THETA), rel=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            sek([1, 2], [1, 2, 3], REF_THETA)
        with pytest.raises(InvalidInputError):
            sek([1, 2], [1, 2], REF_THETA)


class TestBuildKtilde:
    def test_single_content(self):
        K = build_ktilde([[0.0, 1.0, 0.0, 0.2]], REF_THETA).entries
        assert K.shape == (1, 1)
        assert K[0, 0] == pytest.approx(0.1001, rel=1e-15)

    def test_identical_features(self):
        K = build_ktilde([[1, 0, 1, 0.5], [1, 0, 1, 0.5]], REF_THETA).entries
        assert K[0, 1] == K[1, 0] == 0.1
        assert K[0, 0] == K[1, 1] == pytest.approx(0.1001, abs=1e-16)

    def test_matches_brute_force(self):
        X = np.random.default_rng(3).normal(size=(5, 4))
        np.testing.assert_allclose(build_ktilde(X, REF_THETA).entries, brute_ktilde(X, REF_THETA), rtol=0, atol=1e-12)

    def test_non_finite_kernel_reports_pair(self, monkeypatch):
        def broken(X, theta, Y=None):
            K = np.ones((len(X), len(X)))
            K[0, 1] = np.nan
            return K

        monkeypatch.setattr("popgp.kernel.kernel_matrix", broken)
        with pytest.raises(NumericalError, match=r"index pair \(0, 1\)"):
            build_ktilde([[0.0], [1.0]], [1.0, 1.0, 1.0])


class TestCholSolveLogdet:
    def test_identity(self):
        x, logdet = chol_solve_logdet(np.eye(3), [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(x, [1, 2, 3])
        assert logdet == 0.0

    def test_scalar_matrix(self):
        x, logdet = chol_solve_logdet(4 * np.eye(2), [4.0, 8.0])
        np.testing.assert_allclose(x, [1, 2], rtol=1e-15)
        assert logdet == pytest.approx(2 * math.log(4), rel=1e-15)

    def test_random_spd_against_elimination(self):
        rng = np.random.default_rng(11)
        A = rng.normal(size=(6, 6))
        K = A @ A.T + 0.5 * np.eye(6)
        b = rng.normal(size=6)
        x, logdet = chol_solve_logdet(K, b)
        np.testing.assert_allclose(x, gauss_solve(K, b), rtol=1e-9)
        # determinant from the eliminated upper triangle
        U = np.array(K)
        for k in range(6):
            for i in range(k + 1, 6):
                U[i] -= U[i, k] / U[k, k] * U[k]
        assert logdet == pytest.approx(np.sum(np.log(np.diag(U))), rel=1e-9)

    def test_matrix_rhs(self):
        K = np.diag([1.0, 2.0, 4.0])
        x, _ = chol_solve_logdet(K, np.eye(3))
        np.testing.assert_allclose(x, np.diag([1, 0.5, 0.25]))

    def test_jitter_escalation_recorded(self):
        k = CovarianceMatrix(np.ones((3, 3)))
        fac = factorize(k)
        assert fac.jitter > 0
        assert k.jitter_applied == fac.jitter

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            chol_solve_logdet(np.diag([1.0, -1.0]), [1.0, 1.0])

    def test_rhs_rows_checked(self):
        with pytest.raises(InvalidInputError):
            chol_solve_logdet(np.eye(3), [1.0, 2.0])


def finite_difference_dk(X, theta, q, h=1e-6):
    up, down = theta.copy(), theta.copy()
    up[q] *= math.exp(h)
    down[q] *= math.exp(-h)
    return (brute_ktilde(X, up) - brute_ktilde(X, down)) / (2 * h)


class TestDktildeDphi:
    def test_noise_term(self):
        np.testing.assert_array_equal(dktilde_dphi(np.zeros((2, 4)), np.r_[1e-4, 0.1, 0.25, 0.1, 0.1, 0.5], 0), 1e-4 * np.eye(2))

    def test_vertical_scale_is_kernel(self):
        X = np.random.default_rng(0).normal(size=(4, 4))
        theta = np.r_[1e-4, 0.1, 0.25, 0.1, 0.1, 0.5]
        np.testing.assert_allclose(
            dktilde_dphi(X, theta, 1), build_ktilde(X, theta).entries - theta[0] * np.eye(4), rtol=0, atol=1e-17
        )

    @pytest.mark.parametrize("q", range(6))
    def test_matches_finite_differences(self, q):
        rng = np.random.default_rng(q)
        X = rng.normal(size=(5, 4))
        theta = rng.uniform(0.01, 2, size=6)
        fd = finite_difference_dk(X, theta, q)
        an = dktilde_dphi(X, theta, q)
        assert np.max(np.abs(an - fd)) <= 1e-5 * max(np.max(np.abs(an)), 1e-8)

    def test_index_out_of_range(self):
        with pytest.raises(InvalidInputError):
            dktilde_dphi(np.zeros((2, 4)), np.ones(6), 6)


# -- properties -------------------------------------------------------------

positive = st.floats(0.01, 2.0)
features = st.lists(st.floats(-3, 3), min_size=4, max_size=4)


@given(features, features, st.lists(positive, min_size=5, max_size=5))
def test_sek_bounded_and_symmetric(a, b, theta):
    theta = np.r_[1e-3, theta]
    v = sek(a, b, theta)
    assert 0 <= v <= theta[1]
    assert v == sek(b, a, theta)
    assert sek(a, a, theta) == theta[1]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 50), st.integers(0, 2**32 - 1), st.floats(1e-6, 1.0), st.lists(positive, min_size=5, max_size=5))
def test_no_jitter_needed_for_distinct_features(m, seed, theta0, theta):
    rng = np.random.default_rng(seed)
    X = np.hstack([rng.integers(0, 2, size=(m, 3)), rng.normal(size=(m, 1))])
    X = np.unique(X, axis=0)
    k = build_ktilde(X, np.r_[theta0, theta])
    factorize(k)
    assert k.jitter_applied == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1), st.integers(0, 5))
def test_derivative_property(m, seed, q):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, 4))
    theta = rng.uniform(0.01, 2, size=6)
    fd = finite_difference_dk(X, theta, q)
    an = dktilde_dphi(X, theta, q)
    assert np.max(np.abs(an - fd)) <= 1e-5 * max(np.max(np.abs(an)), 1e-8)


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.floats(1.01, 10))
def test_larger_scale_never_raises_off_diagonal(seed, q, factor):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(6, 4))
    theta = rng.uniform(0.01, 2, size=6)
    bigger = theta.copy()
    bigger[q] *= factor
    off = ~np.eye(6, dtype=bool)
    assert np.all(build_ktilde(X, bigger).entries[off] <= build_ktilde(X, theta).entries[off])
