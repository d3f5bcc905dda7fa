"""Feature-based Bayesian content popularity prediction.

Request counts are modelled as Poisson with log-rates drawn from a Gaussian
process over content features; the posterior is sampled with Hamiltonian
Monte Carlo.
"""

from .baseline import MleRates, mle_rates
from .errors import InvalidInputError, NotPositiveDefiniteError, NumericalError, ParseError, PopGPError
from .inference import fit, initial_state
from .kernel import build_ktilde, chol_solve_logdet, dktilde_dphi, sek
from .model import (
    GammaHyperPriors,
    LatentState,
    PoissonGPPosterior,
    RequestHistory,
    SufficientStats,
    grad_neg_log_posterior,
    neg_log_posterior,
)
from .predict import conditional_lambda_params, predict_existing, predict_new_content, sample_future_requests
from .sampler import HmcConfig, PosteriorChain, hamiltonian, hmc_step, leapfrog, run_chain

__version__ = "0.1.0"
