"""Synthetic catalogs, latent popularities and Poisson request histories.

Every random quantity comes from its own named stream derived from the
caller's seed, so e.g. changing the number of slots leaves the catalog and
the latent popularities untouched.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .kernel import as_catalog, build_ktilde, check_theta, factorize, kernel_matrix
from .model import RequestHistory

#: Ground-truth kernel parameters of the reference experiment (theta_0 .. theta_5).
REFERENCE_THETA = np.array([0.0001, 0.1, 0.25, 0.0, 0.1, 0.5])
#: Success probabilities of the three binary features.
BERNOULLI_PROBS = (0.5, 0.8, 0.2)

_STREAMS = {"features": 1, "latent": 2, "requests": 3, "holdout": 4, "hmc": 5}


def stream(seed, name, *keys):
    """Independent generator for ``name`` derived from ``seed`` and integer ``keys``."""
    return np.random.default_rng([int(seed), _STREAMS[name], *map(int, keys)])


@dataclass
class SyntheticScenario:
    catalog: np.ndarray
    true_params: np.ndarray
    true_lambda: np.ndarray
    true_rates: np.ndarray
    rng_seed: int = 0

    @property
    def n_contents(self):
        return self.catalog.shape[0]

    @property
    def q_dim(self):
        return self.catalog.shape[1]


def gen_features(m_contents, seed, probs=BERNOULLI_PROBS):
    """Catalog of ``m_contents`` feature vectors.

    The first ``len(probs)`` columns are Bernoulli draws with the given
    success probabilities, the last column is standard normal.
    """
    if int(m_contents) < 1:
        raise InvalidInputError(f"m_contents must be >= 1, got {m_contents}")
    rng = stream(seed, "features")
    binary = rng.random((int(m_contents), len(probs))) < np.asarray(probs)
    continuous = rng.standard_normal((int(m_contents), 1))
    return np.hstack([binary.astype(float), continuous])


def gen_ground_truth(catalog, true_params, seed):
    """Draw ``lambda ~ N(0, K + theta0 I)`` for the catalog."""
    X = as_catalog(catalog)
    theta = check_theta(true_params, X.shape[1], allow_zero=True)
    fac = factorize(build_ktilde(X, theta))
    z = stream(seed, "latent").standard_normal(X.shape[0])
    lam = fac.lower @ z
    return SyntheticScenario(X, theta, lam, np.exp(lam), int(seed))


def gen_requests(scenario, n_slots, seed):
    """Independent Poisson counts ``d[m, n] ~ Poisson(true_rates[m])``.

    Slots are drawn one after another, so histories generated from the same
    seed are nested: the first ``n`` slots agree for every ``n_slots >= n``.
    """
    if int(n_slots) < 1:
        raise InvalidInputError(f"n_slots must be >= 1, got {n_slots}")
    rng = stream(seed, "requests")
    counts = rng.poisson(scenario.true_rates, size=(int(n_slots), scenario.n_contents))
    return RequestHistory(np.ascontiguousarray(counts.T))


def sample_lambda_marginal(catalog, params, rng, size):
    """``size`` draws of lambda from ``N(0, K + theta0 I)``, shape ``(size, M)``."""
    X = as_catalog(catalog)
    fac = factorize(build_ktilde(X, check_theta(params, X.shape[1], allow_zero=True)))
    return rng.standard_normal((size, X.shape[0])) @ fac.lower.T


def sample_lambda_hierarchical(catalog, params, rng, size):
    """``size`` draws via the two-level route: ``f ~ N(0, K)``, then ``lambda | f ~ N(f, theta0)``."""
    X = as_catalog(catalog)
    theta = check_theta(params, X.shape[1], allow_zero=True)
    K = kernel_matrix(X, theta)
    f = rng.multivariate_normal(np.zeros(X.shape[0]), K, size=size, method="eigh")
    return f + np.sqrt(theta[0]) * rng.standard_normal(f.shape)
