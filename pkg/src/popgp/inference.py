"""Fit the popularity model to a request history with HMC."""

import numpy as np

from .model import GammaHyperPriors, LatentState, PoissonGPPosterior, SufficientStats
from .sampler import HmcConfig, run_chain


def initial_state(stats, q_dim):
    """Smoothed MLE natural parameters and unit hyperparameters."""
    lam = np.log((stats.total_requests + 0.5) / stats.slot_count)
    return LatentState(lam, np.zeros(q_dim + 2))


def fit(history, catalog, priors=None, config=None, init=None):
    """Sample the posterior of ``(lambda, log theta)`` given counts and features.

    Parameters
    ----------
    history : RequestHistory or array_like
        ``(M, N)`` request counts.
    catalog : array_like
        ``(M, Q)`` content features.
    priors : GammaHyperPriors, optional
        Defaults to unit shape and rate.
    config : HmcConfig, optional
        Defaults to ``HmcConfig()``.
    init : LatentState, optional
        Defaults to :func:`initial_state`.

    Returns
    -------
    PosteriorChain
    """
    stats = history if isinstance(history, SufficientStats) else SufficientStats.from_history(history)
    target = PoissonGPPosterior(stats, catalog, priors or None)
    config = config or HmcConfig()
    init = init or initial_state(stats, target.Q)
    chain = run_chain(init.to_vector(), config, target.value, target.grad, n_contents=target.M)
    chain.meta["priors_shape"] = target.priors.shape.tolist()
    chain.meta["priors_rate"] = target.priors.rate.tolist()
    return chain


__all__ = ["GammaHyperPriors", "HmcConfig", "fit", "initial_state"]
