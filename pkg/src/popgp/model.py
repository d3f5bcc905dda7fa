"""Hierarchical Poisson / Gaussian-process posterior over ``zeta = (lambda, phi)``.

Requests follow ``d[m, n] ~ Poisson(exp(lambda[m]))``; after integrating out
the latent GP values, ``lambda ~ N(0, K + theta0 I)``.  Each positive
hyperparameter carries a Gamma(shape, rate) prior and is sampled as
``phi = log(theta)``.  The potential below is the negative log of the
unnormalized posterior in the ``zeta`` coordinates (Jacobian included),
with every additive constant dropped.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError
from .kernel import (
    as_catalog,
    build_ktilde,
    dktilde_dphi,
    factorize,
    kernel_from_sqdist,
    pairwise_sqdist,
)

#: Largest natural parameter whose exponential is evaluated.
LAMBDA_OVERFLOW = 700.0


@dataclass
class RequestHistory:
    """Per-slot request counts, shape ``(M, N)``."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or min(counts.shape) < 1:
            raise InvalidInputError(f"request counts must be an (M, N) matrix, got {counts.shape}")
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(np.isfinite(counts)) or np.any(counts != np.round(counts)):
                raise InvalidInputError("request counts must be integers")
            counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise InvalidInputError("request counts must be non-negative")
        self.counts = counts.astype(np.int64, copy=False)

    @property
    def n_contents(self):
        return self.counts.shape[0]

    @property
    def slot_count(self):
        return self.counts.shape[1]


@dataclass(frozen=True)
class SufficientStats:
    total_requests: np.ndarray
    slot_count: int

    @classmethod
    def from_history(cls, history):
        if not isinstance(history, RequestHistory):
            history = RequestHistory(history)
        return cls(history.counts.sum(axis=1), history.slot_count)


@dataclass(frozen=True)
class GammaHyperPriors:
    """Gamma(shape, rate) priors on ``theta_0 .. theta_{Q+1}``."""

    shape: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        shape = np.asarray(self.shape, dtype=float)
        rate = np.asarray(self.rate, dtype=float)
        if shape.ndim != 1 or shape.shape != rate.shape:
            raise InvalidInputError("prior shape and rate must be vectors of equal length")
        if not (np.all(shape > 0) and np.all(rate > 0)):
            raise InvalidInputError("Gamma prior shape and rate must be strictly positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "rate", rate)

    @classmethod
    def default(cls, q_dim):
        """Unit shape and rate for every hyperparameter."""
        return cls(np.ones(q_dim + 2), np.ones(q_dim + 2))


@dataclass
class LatentState:
    """Sampler state: natural parameters ``lam`` and log-hyperparameters ``phi``."""

    lam: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)

    @property
    def theta(self):
        return np.exp(self.phi)

    @property
    def rates(self):
        return np.exp(self.lam)

    def to_vector(self):
        return np.concatenate([self.lam, self.phi])

    @classmethod
    def from_vector(cls, zeta, n_contents):
        zeta = np.asarray(zeta, dtype=float)
        return cls(zeta[:n_contents].copy(), zeta[n_contents:].copy())


def _exp_lambda(lam):
    over = np.flatnonzero(lam > LAMBDA_OVERFLOW)
    if over.size:
        m = int(over[0])
        raise NumericalError(f"exp(lambda) overflow for content {m} (lambda={lam[m]:.6g})")
    return np.exp(lam)


def _check_dims(state, stats, X, priors):
    M, Q = X.shape
    if state.lam.shape != (M,) or stats.total_requests.shape != (M,):
        raise InvalidInputError(f"expected {M} natural parameters and request totals")
    if state.phi.shape != (Q + 2,) or priors.shape.shape != (Q + 2,):
        raise InvalidInputError(f"expected {Q + 2} hyperparameters for Q={Q}")
    if not (np.all(np.isfinite(state.lam)) and np.all(np.isfinite(state.phi))):
        raise InvalidInputError("latent state contains non-finite entries")


def neg_log_posterior(state, stats, catalog, priors):
    """Potential energy ``psi(zeta)`` (additive constants omitted)."""
    X = as_catalog(catalog)
    _check_dims(state, stats, X, priors)
    lam, phi = state.lam, state.phi
    theta = np.exp(phi)
    fac = factorize(build_ktilde(X, theta))
    alpha = fac.solve(lam)
    data = float(np.sum(-stats.total_requests * lam + stats.slot_count * _exp_lambda(lam)))
    gp = 0.5 * fac.logdet + 0.5 * float(lam @ alpha)
    prior = float(np.sum(-priors.shape * phi + priors.rate * theta))
    return data + gp + prior


def grad_neg_log_posterior(state, stats, catalog, priors):
    """Gradient of :func:`neg_log_posterior`, ordered as ``(lambda, phi)``."""
    X = as_catalog(catalog)
    _check_dims(state, stats, X, priors)
    lam, phi = state.lam, state.phi
    theta = np.exp(phi)
    fac = factorize(build_ktilde(X, theta))
    alpha = fac.solve(lam)
    Kinv = fac.inverse()
    g_lam = -stats.total_requests + stats.slot_count * _exp_lambda(lam) + alpha
    g_phi = np.empty_like(phi)
    for q in range(phi.size):
        dK = dktilde_dphi(X, theta, q)
        g_phi[q] = 0.5 * np.sum(Kinv * dK) - 0.5 * alpha @ dK @ alpha
    g_phi += -priors.shape + priors.rate * theta
    return np.concatenate([g_lam, g_phi])


class PoissonGPPosterior:
    """Potential and gradient on flat ``zeta`` vectors, for use by the sampler.

    Pairwise feature distances are computed once, and the Cholesky factor of
    the covariance is cached for the most recent ``phi`` so that a value and
    a gradient at the same point share one factorization.
    """

    def __init__(self, stats, catalog, priors=None):
        if not isinstance(stats, SufficientStats):
            stats = SufficientStats.from_history(stats)
        self.X = as_catalog(catalog)
        self.M, self.Q = self.X.shape
        self.stats = stats
        self.priors = GammaHyperPriors.default(self.Q) if priors is None else priors
        if stats.total_requests.shape != (self.M,):
            raise InvalidInputError(
                f"request totals for {stats.total_requests.shape[0]} contents, catalog has {self.M}"
            )
        if self.priors.shape.shape != (self.Q + 2,):
            raise InvalidInputError(f"expected {self.Q + 2} hyperpriors for Q={self.Q}")
        self.sqdist = pairwise_sqdist(self.X)
        self._totals = stats.total_requests.astype(float)
        self._cache_key = None
        self._cache = None

    @property
    def dim(self):
        return self.M + self.Q + 2

    def split(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        if zeta.shape != (self.dim,):
            raise InvalidInputError(f"expected state of length {self.dim}, got {zeta.shape}")
        return zeta[: self.M], zeta[self.M :]

    def _factor(self, phi):
        key = phi.tobytes()
        if key != self._cache_key:
            if not np.all(np.isfinite(phi)):
                raise NumericalError("non-finite log-hyperparameters")
            theta = np.exp(phi)
            K = kernel_from_sqdist(self.sqdist, theta)
            Kt = K.copy()
            Kt[np.diag_indices_from(Kt)] += theta[0]
            fac = factorize(Kt)
            self._cache = (theta, K, fac, None)
            self._cache_key = key
        return self._cache

    def _inverse(self):
        theta, K, fac, Kinv = self._cache
        if Kinv is None:
            Kinv = fac.inverse_lower()
            self._cache = (theta, K, fac, Kinv)
        return Kinv

    def value(self, zeta):
        lam, phi = self.split(zeta)
        theta, _, fac, _ = self._factor(phi)
        alpha = fac.solve(lam)
        data = np.sum(-self._totals * lam + self.stats.slot_count * _exp_lambda(lam))
        prior = np.sum(-self.priors.shape * phi + self.priors.rate * theta)
        return float(data + 0.5 * fac.logdet + 0.5 * lam @ alpha + prior)

    def grad(self, zeta):
        lam, phi = self.split(zeta)
        theta, K, fac, _ = self._factor(phi)
        alpha = fac.solve(lam)
        # with W = Kt^-1 - alpha alpha^T, d psi / d phi_q = sum(W * dKt_q) / 2.
        # Only the lower triangle of Kt^-1 is formed; every dKt_q is symmetric
        # and the distance matrices have a zero diagonal.
        inv_lower = self._inverse()
        S = inv_lower * K
        G = np.outer(alpha, alpha) * K
        flat_d = self.sqdist.reshape(self.Q, -1)
        g = np.empty(self.dim)
        g[: self.M] = -self._totals + self.stats.slot_count * _exp_lambda(lam) + alpha
        g_phi = g[self.M :]
        g_phi[0] = 0.5 * theta[0] * (np.trace(inv_lower) - alpha @ alpha)
        g_phi[1] = np.sum(S) - 0.5 * np.trace(S) - 0.5 * np.sum(G)
        g_phi[2:] = -0.5 * theta[2:] * (flat_d @ (2.0 * S - G).ravel())
        g_phi += -self.priors.shape + self.priors.rate * theta
        return g

    def state(self, zeta):
        return LatentState.from_vector(zeta, self.M)
