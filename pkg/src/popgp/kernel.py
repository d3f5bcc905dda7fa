"""ARD squared-exponential kernel and the dense linear algebra built on it.

Hyperparameters are stored as a single vector ``theta`` of length ``Q + 2``:

* ``theta[0]``  observation-level variance added to the diagonal,
* ``theta[1]``  vertical scale of the kernel,
* ``theta[2:]`` one inverse-squared length scale per feature dimension.

A catalog is an ``(M, Q)`` array with one feature vector per row.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import InvalidInputError, NotPositiveDefiniteError, NumericalError

#: Diagonal regularization tried, in order, when a factorization fails.
JITTER_LADDER = (1e-10, 1e-8, 1e-6)


def as_catalog(catalog):
    """Return ``catalog`` as a finite 2-D float array of shape ``(M, Q)``."""
    X = np.asarray(catalog, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidInputError(f"catalog must have shape (M, Q) with M, Q >= 1, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("catalog contains non-finite feature values")
    return X


def check_theta(theta, q_dim, allow_zero=False):
    """Validate a hyperparameter vector for ``q_dim`` features and return it as an array.

    ``allow_zero`` admits exact zeros, which the synthetic generator uses for
    irrelevant features; inference always requires strictly positive values.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size != q_dim + 2:
        raise InvalidInputError(
            f"expected {q_dim + 2} kernel parameters for Q={q_dim}, got shape {theta.shape}"
        )
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("kernel parameters must be finite")
    if allow_zero:
        if np.any(theta < 0):
            raise InvalidInputError("kernel parameters must be non-negative")
    elif np.any(theta <= 0):
        raise InvalidInputError("kernel parameters must be strictly positive")
    return theta


def sek(x_i, x_j, theta):
    """Squared-exponential kernel with one relevance scale per dimension.

    Returns ``theta[1] * exp(-sum_q theta[q + 2] * (x_i[q] - x_j[q]) ** 2)``.
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i.ndim != 1 or x_i.shape != x_j.shape:
        raise InvalidInputError(f"feature vectors differ in shape: {x_i.shape} vs {x_j.shape}")
    theta = check_theta(theta, x_i.size, allow_zero=True)
    # sum of squares first so that sek(a, b) == sek(b, a) bitwise
    diff = x_i - x_j
    return float(theta[1] * np.exp(-np.dot(theta[2:], diff * diff)))


def pairwise_sqdist(X, Y=None):
    """Per-dimension squared differences, shape ``(Q, len(X), len(Y))``."""
    X = np.asarray(X, dtype=float)
    Y = X if Y is None else np.asarray(Y, dtype=float)
    diff = X.T[:, :, None] - Y.T[:, None, :]
    return diff * diff


def kernel_from_sqdist(sqdist, theta):
    """Noise-free kernel matrix from precomputed per-dimension squared differences."""
    return theta[1] * np.exp(-np.tensordot(theta[2:], sqdist, axes=1))


def kernel_matrix(X, theta, Y=None):
    """Noise-free kernel matrix ``K(X, Y)``; ``Y`` defaults to ``X``."""
    return kernel_from_sqdist(pairwise_sqdist(X, Y), np.asarray(theta, dtype=float))


@dataclass
class CovarianceMatrix:
    """Dense covariance with a record of any jitter added while factorizing it."""

    entries: np.ndarray
    jitter_applied: float = 0.0

    @property
    def size(self):
        return self.entries.shape[0]


def build_ktilde(catalog, theta):
    """Marginal covariance of the natural parameters, ``K + theta[0] * I``."""
    X = as_catalog(catalog)
    theta = check_theta(theta, X.shape[1], allow_zero=True)
    K = kernel_matrix(X, theta)
    bad = np.argwhere(~np.isfinite(K))
    if bad.size:
        i, j = bad[0]
        raise NumericalError(f"non-finite kernel value at index pair ({i}, {j})")
    K[np.diag_indices_from(K)] += theta[0]
    return CovarianceMatrix(K)


class Factorization:
    """Cholesky factor of an SPD matrix with cached log-determinant.

    Attributes
    ----------
    lower : ndarray
        Lower-triangular factor ``L`` with ``L @ L.T == A + jitter * I``.
    logdet : float
        ``log det(A + jitter * I)``.
    jitter : float
        Diagonal regularization that was needed, 0.0 if none.
    """

    def __init__(self, lower, jitter):
        self.lower = lower
        self.jitter = jitter
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        x, info = lapack.dpotrs(self.lower, rhs, lower=1)
        if info != 0:
            raise NumericalError(f"triangular solve failed (LAPACK info={info})")
        return x

    def inverse_lower(self):
        """Lower triangle (diagonal included) of the inverse; the upper part is zero."""
        inv, info = lapack.dpotri(self.lower, lower=1)
        if info != 0:
            raise NumericalError(f"inverse from Cholesky factor failed (LAPACK info={info})")
        return inv

    def inverse(self):
        inv = self.inverse_lower()
        return inv + np.tril(inv, -1).T


def factorize(k):
    """Cholesky-factorize ``k``, escalating diagonal jitter along :data:`JITTER_LADDER`.

    ``k`` may be an array or a :class:`CovarianceMatrix`; in the latter case
    its ``jitter_applied`` field is updated.
    """
    A = k.entries if isinstance(k, CovarianceMatrix) else np.asarray(k, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"covariance must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalError("covariance contains non-finite entries")
    for jitter in (0.0,) + JITTER_LADDER:
        M = A if jitter == 0.0 else A + jitter * np.eye(A.shape[0])
        L, info = lapack.dpotrf(M, lower=1, clean=1)
        if info == 0:
            if isinstance(k, CovarianceMatrix):
                k.jitter_applied = jitter
            return Factorization(L, jitter)
    raise NotPositiveDefiniteError(
        f"Cholesky factorization failed with maximum jitter {JITTER_LADDER[-1]:g}"
    )


def chol_solve_logdet(k, rhs):
    """Return ``(k^-1 rhs, log det k)`` from a single Cholesky factorization."""
    fac = factorize(k)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != fac.lower.shape[0]:
        raise InvalidInputError(
            f"rhs has {rhs.shape[0]} rows, covariance is {fac.lower.shape[0]}x{fac.lower.shape[0]}"
        )
    return fac.solve(rhs), fac.logdet


def dktilde_dphi(catalog, theta, q):
    """Derivative of ``K + theta[0] I`` with respect to ``log(theta[q])``."""
    X = as_catalog(catalog)
    theta = check_theta(theta, X.shape[1])
    if not 0 <= q < theta.size:
        raise InvalidInputError(f"parameter index {q} out of range 0..{theta.size - 1}")
    M = X.shape[0]
    if q == 0:
        return theta[0] * np.eye(M)
    sqdist = pairwise_sqdist(X)
    K = kernel_from_sqdist(sqdist, theta)
    if q == 1:
        return K
    return -theta[q] * sqdist[q - 2] * K
