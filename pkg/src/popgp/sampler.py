"""Hamiltonian Monte Carlo with a fixed identity mass matrix.

The sampler works on flat state vectors and takes the potential ``psi`` and
its gradient as plain callables, so it is independent of the popularity
model.  Integration uses the symmetric leapfrog scheme: half momentum steps
at both ends of the trajectory and full steps in between.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, PopGPError

log = logging.getLogger(__name__)

#: Trajectories whose energy error exceeds this are rejected and flagged divergent.
DIVERGENCE_THRESHOLD = 1000.0

# numerical failures that turn a trajectory into a rejection instead of an abort
_TRAJECTORY_ERRORS = (PopGPError, ArithmeticError, np.linalg.LinAlgError, FloatingPointError)


@dataclass
class HmcConfig:
    step_size: float = 0.015
    leapfrog_steps: int = 20
    total_samples: int = 5000
    burn_in: int = 2500
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.step_size > 0 and np.isfinite(self.step_size)):
            raise InvalidInputError(f"step_size must be positive, got {self.step_size}")
        if int(self.leapfrog_steps) < 1:
            raise InvalidInputError(f"leapfrog_steps must be >= 1, got {self.leapfrog_steps}")
        if int(self.total_samples) < 1:
            raise InvalidInputError(f"total_samples must be >= 1, got {self.total_samples}")
        if not 0 <= int(self.burn_in) < int(self.total_samples):
            raise InvalidInputError(
                f"burn_in must lie in [0, total_samples), got {self.burn_in} of {self.total_samples}"
            )
        if not 0 <= int(self.rng_seed) < 2**64:
            raise InvalidInputError("rng_seed must be a 64-bit unsigned integer")
        self.leapfrog_steps = int(self.leapfrog_steps)
        self.total_samples = int(self.total_samples)
        self.burn_in = int(self.burn_in)
        self.rng_seed = int(self.rng_seed)


@dataclass
class PosteriorChain:
    """Output of :func:`run_chain`.

    ``samples`` holds the retained (post burn-in) states as rows.  The
    per-proposal traces cover the whole run, burn-in included:
    ``hamiltonian_trace[s]`` is H at the state the chain occupies after
    proposal ``s``.
    """

    samples: np.ndarray
    accepted: np.ndarray
    hamiltonian_trace: np.ndarray
    divergent: np.ndarray = None
    n_contents: int = None
    config: HmcConfig = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        self.accepted = np.asarray(self.accepted, dtype=bool)
        self.hamiltonian_trace = np.asarray(self.hamiltonian_trace, dtype=float)
        if self.divergent is None:
            self.divergent = np.zeros_like(self.accepted)
        self.divergent = np.asarray(self.divergent, dtype=bool)
        if self.n_contents is None:
            self.n_contents = self.samples.shape[1]

    def __len__(self):
        return self.samples.shape[0]

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accepted)) if self.accepted.size else 0.0

    @property
    def lam(self):
        """Retained natural parameters, shape ``(S, M)``."""
        return self.samples[:, : self.n_contents]

    @property
    def phi(self):
        """Retained log-hyperparameters, shape ``(S, Q + 2)``."""
        return self.samples[:, self.n_contents :]

    @property
    def theta(self):
        return np.exp(self.phi)

    def states(self):
        from .model import LatentState

        return [LatentState(row[: self.n_contents], row[self.n_contents :]) for row in self.samples]


def hamiltonian(state, momentum, psi):
    """Potential plus kinetic energy ``psi(q) + p.p / 2`` (constant terms dropped)."""
    momentum = np.asarray(momentum, dtype=float)
    state = np.asarray(state, dtype=float)
    if momentum.shape != state.shape:
        raise InvalidInputError(f"momentum shape {momentum.shape} != state shape {state.shape}")
    return psi(state) + 0.5 * float(momentum @ momentum)


def leapfrog(state, momentum, config, grad):
    """Integrate Hamilton's equations for ``config.leapfrog_steps`` steps.

    Returns the end point ``(q, p)``.  If the gradient cannot be evaluated
    along the way the trajectory is divergent and both arrays come back
    filled with NaN, which :func:`hmc_step` always rejects.
    """
    eps = config.step_size
    q = np.array(state, dtype=float)
    p = np.array(momentum, dtype=float)
    try:
        p -= 0.5 * eps * grad(q)
        for step in range(config.leapfrog_steps):
            q += eps * p
            if step < config.leapfrog_steps - 1:
                p -= eps * grad(q)
        p -= 0.5 * eps * grad(q)
    except _TRAJECTORY_ERRORS as exc:
        log.debug("divergent trajectory: %s", exc)
        q.fill(np.nan)
        p.fill(np.nan)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        q.fill(np.nan)
        p.fill(np.nan)
    return q, p


def hmc_step(current, config, psi, grad, rng, current_psi=None):
    """One Metropolis-corrected HMC transition.

    Returns ``(next_state, accepted, dH)``.  On rejection ``next_state`` is
    ``current`` itself.  Divergent trajectories give ``dH = inf``.
    """
    if current_psi is None:
        current_psi = psi(current)
    p0 = rng.standard_normal(np.shape(current))
    h0 = current_psi + 0.5 * float(p0 @ p0)
    q1, p1 = leapfrog(current, p0, config, grad)
    dH = np.inf
    if np.all(np.isfinite(q1)):
        try:
            dH = psi(q1) + 0.5 * float(p1 @ p1) - h0
        except _TRAJECTORY_ERRORS as exc:
            log.debug("potential failed at proposal: %s", exc)
    u = rng.random()
    if not np.isfinite(dH) or abs(dH) > DIVERGENCE_THRESHOLD:
        return current, False, float(dH) if np.isfinite(dH) else np.inf
    if u < np.exp(-dH):
        return q1, True, float(dH)
    return current, False, float(dH)


def run_chain(init, config, psi, grad, n_contents=None):
    """Run ``config.total_samples`` HMC transitions from ``init``.

    The generator is seeded from ``config.rng_seed`` so identical inputs give
    identical chains.  The first ``config.burn_in`` states are discarded from
    ``samples`` but kept in the acceptance and energy traces.
    """
    q = np.array(init, dtype=float).ravel()
    if not np.all(np.isfinite(q)):
        raise InvalidInputError("initial state contains non-finite entries")
    try:
        current_psi = psi(q)
    except _TRAJECTORY_ERRORS as exc:
        raise InvalidInputError(f"potential cannot be evaluated at the initial state: {exc}") from exc
    if not np.isfinite(current_psi):
        raise InvalidInputError("potential is not finite at the initial state")

    rng = np.random.default_rng(config.rng_seed)
    S = config.total_samples
    kept = np.empty((S - config.burn_in, q.size))
    accepted = np.zeros(S, dtype=bool)
    divergent = np.zeros(S, dtype=bool)
    h_trace = np.empty(S)
    for s in range(S):
        q_next, acc, dH = hmc_step(q, config, psi, grad, rng, current_psi)
        if acc:
            q = q_next
            current_psi = psi(q)
        accepted[s] = acc
        divergent[s] = not np.isfinite(dH) or abs(dH) > DIVERGENCE_THRESHOLD
        # H recorded with zero momentum, i.e. the potential of the occupied state
        h_trace[s] = current_psi
        if s >= config.burn_in:
            kept[s - config.burn_in] = q
    if divergent.any():
        log.info("%d of %d trajectories diverged", divergent.sum(), S)
    return PosteriorChain(
        samples=kept,
        accepted=accepted,
        hamiltonian_trace=h_trace,
        divergent=divergent,
        n_contents=q.size if n_contents is None else n_contents,
        config=config,
    )


def autocorrelation_time(x):
    """Integrated autocorrelation time of a 1-D series (Geyer initial positive sequence)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return 1.0
    x = x - x.mean()
    var = x @ x / n
    if var == 0:
        return 1.0
    f = np.fft.rfft(x, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = acf[k] + acf[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return max(tau, 1.0)


def effective_sample_size(x):
    x = np.asarray(x, dtype=float)
    return x.size / autocorrelation_time(x)


def monte_carlo_standard_error(x):
    """Standard error of the sample mean of a correlated series."""
    x = np.asarray(x, dtype=float)
    return float(np.std(x) / np.sqrt(effective_sample_size(x)))
