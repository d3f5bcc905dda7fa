"""Posterior-predictive popularity for catalog contents and for unseen contents."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError, PopGPError
from .kernel import as_catalog, factorize, kernel_from_sqdist, pairwise_sqdist

log = logging.getLogger(__name__)

QUANTILE_LEVELS = (0.05, 0.5, 0.95)
#: Largest fraction of posterior samples that may fail conditioning.
MAX_SKIPPED_FRACTION = 0.01


@dataclass
class RatePrediction:
    mean_rate: np.ndarray
    quantiles: np.ndarray  # (M, 3) at QUANTILE_LEVELS
    sample_count: int


@dataclass
class NewContentPrediction:
    mean_rate: float
    lambda_conditional_mean_samples: np.ndarray
    lambda_conditional_var_samples: np.ndarray
    clamped_count: int = 0
    skipped_count: int = 0

    @property
    def corrected_mean_rate(self):
        """Lognormal-corrected alternative, ``mean(exp(mu + var / 2))``."""
        mu = self.lambda_conditional_mean_samples
        var = self.lambda_conditional_var_samples
        return float(np.mean(np.exp(mu + 0.5 * var)))


def _require_samples(chain):
    if chain is None or len(chain) == 0:
        raise InvalidInputError("posterior chain has no samples")


def predict_existing(chain):
    """Posterior mean of ``exp(lambda_m)`` plus 5/50/95% rate quantiles."""
    _require_samples(chain)
    rates = np.exp(chain.lam)
    return RatePrediction(
        mean_rate=rates.mean(axis=0),
        quantiles=np.quantile(rates, QUANTILE_LEVELS, axis=0).T,
        sample_count=rates.shape[0],
    )


def sample_future_requests(chain, rng, draws):
    """Posterior-predictive request counts, shape ``(M, draws)``.

    Each draw picks a retained posterior sample uniformly at random and then
    draws one Poisson count per content at that sample's rates.
    """
    _require_samples(chain)
    if int(draws) < 1:
        raise InvalidInputError(f"draws must be >= 1, got {draws}")
    idx = rng.integers(0, len(chain), size=int(draws))
    rates = np.exp(chain.lam[idx])
    return rng.poisson(rates).T


def _conditional(sqdist_cat, sqdist_new, lam, theta):
    K = kernel_from_sqdist(sqdist_cat, theta)
    K[np.diag_indices_from(K)] += theta[0]
    fac = factorize(K)
    k = kernel_from_sqdist(sqdist_new, theta)[:, 0]
    mean = float(k @ fac.solve(lam))
    var = float(theta[1] + theta[0] - k @ fac.solve(k))
    return mean, var


def conditional_lambda_params(x_new, state, catalog):
    """Mean and variance of ``lambda_new`` given the catalog's ``lambda`` and ``theta``.

    The variance is clamped at zero; roundoff can push it slightly negative
    when ``x_new`` duplicates a catalog entry.
    """
    X = as_catalog(catalog)
    x_new = np.asarray(x_new, dtype=float).reshape(1, -1)
    if x_new.shape[1] != X.shape[1]:
        raise InvalidInputError(f"new content has {x_new.shape[1]} features, catalog has {X.shape[1]}")
    mean, var = _conditional(pairwise_sqdist(X), pairwise_sqdist(X, x_new), state.lam, state.theta)
    return mean, max(var, 0.0)


def predict_new_content(chain, x_new, catalog):
    """Popularity of an unseen content: mean over samples of ``exp(conditional mean)``.

    Samples whose covariance cannot be factorized are skipped; more than
    :data:`MAX_SKIPPED_FRACTION` of them raises :class:`NumericalError`.
    """
    _require_samples(chain)
    X = as_catalog(catalog)
    x_new = np.asarray(x_new, dtype=float).reshape(1, -1)
    if x_new.shape[1] != X.shape[1] or chain.n_contents != X.shape[0]:
        raise InvalidInputError("new content, catalog and chain dimensions disagree")
    d_cat = pairwise_sqdist(X)
    d_new = pairwise_sqdist(X, x_new)
    means, variances = [], []
    skipped = clamped = 0
    for lam, phi in zip(chain.lam, chain.phi):
        try:
            mu, var = _conditional(d_cat, d_new, lam, np.exp(phi))
        except PopGPError as exc:
            log.debug("conditioning failed for a posterior sample: %s", exc)
            skipped += 1
            continue
        if var < 0:
            var = 0.0
            clamped += 1
        means.append(mu)
        variances.append(var)
    if skipped > MAX_SKIPPED_FRACTION * len(chain):
        raise NumericalError(f"conditioning failed for {skipped} of {len(chain)} posterior samples")
    means = np.array(means)
    return NewContentPrediction(
        mean_rate=float(np.mean(np.exp(means))),
        lambda_conditional_mean_samples=means,
        lambda_conditional_var_samples=np.array(variances),
        clamped_count=clamped,
        skipped_count=skipped,
    )
