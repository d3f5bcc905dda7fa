"""Synthetic experiments: popularity RMSE sweeps and hyperparameter recovery.

Each trial draws ``M + 1`` contents and their joint natural parameters from
the GP, keeps the first ``M`` as the catalog and holds the last one out as a
new content.  For every ``N`` in the grid the model is fitted to the first
``N`` slots of one request stream (histories are nested across ``N``), and
three errors are recorded: Bayesian rate estimates for the catalog, the MLE
baseline, and the held-out content's predicted rate.

CSV schemas
-----------
RMSE reports (``fig2_rmse.csv``, ``fig3_rmse.csv``) use :data:`RMSE_COLUMNS`.
``rmse_*`` is the square root of the trial-averaged mean squared error and
``se_*`` its delta-method standard error across trials.

Hyperparameter reports (``tables_theta.csv``) use :func:`table_columns`:
one row per ``(m_contents, parameter)`` with the true value followed by the
trial-averaged posterior mean of ``theta_q`` at each ``N``.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baseline import mle_rates
from .errors import InvalidInputError, PopGPError
from .inference import fit
from .io import write_csv
from .model import GammaHyperPriors
from .predict import predict_existing, predict_new_content
from .sampler import HmcConfig
from .synthetic import (
    REFERENCE_THETA,
    SyntheticScenario,
    gen_features,
    gen_ground_truth,
    gen_requests,
    stream,
)

log = logging.getLogger(__name__)

RMSE_COLUMNS = (
    "m_contents",
    "n_slots",
    "trial_count",
    "failed_trials",
    "rmse_bayes_type1",
    "se_bayes_type1",
    "rmse_mle",
    "se_mle",
    "rmse_type2",
    "se_type2",
)
#: Fraction of failed trials above which a run is aborted.
MAX_FAILED_FRACTION = 0.10


class ExperimentError(PopGPError):
    pass


def table_columns(n_slots_grid):
    return ("m_contents", "parameter", "true_value") + tuple(f"N={n}" for n in n_slots_grid)


@dataclass
class ExperimentConfig:
    m_contents: tuple = (50, 100)
    n_slots_grid: tuple = (25, 50, 100, 200, 400)
    trials: int = 20
    hmc: HmcConfig = field(default_factory=HmcConfig)
    priors: GammaHyperPriors = None
    true_params: np.ndarray = field(default_factory=lambda: REFERENCE_THETA.copy())
    seed: int = 0

    def __post_init__(self):
        self.m_contents = tuple(int(m) for m in np.atleast_1d(self.m_contents))
        self.n_slots_grid = tuple(int(n) for n in self.n_slots_grid)
        self.true_params = np.asarray(self.true_params, dtype=float)
        grid = np.array(self.n_slots_grid)
        if grid.size == 0 or grid[0] < 1 or np.any(np.diff(grid) <= 0):
            raise InvalidInputError("n_slots_grid must be strictly increasing positive integers")
        if not self.m_contents or min(self.m_contents) < 1:
            raise InvalidInputError("m_contents must be positive")
        if int(self.trials) < 1:
            raise InvalidInputError("trials must be >= 1")
        self.trials = int(self.trials)
        if isinstance(self.hmc, dict):
            self.hmc = HmcConfig(**self.hmc)
        if isinstance(self.priors, dict):
            self.priors = GammaHyperPriors(**self.priors)

    @classmethod
    def smoke(cls, **overrides):
        params = dict(
            m_contents=(10,),
            n_slots_grid=(25,),
            trials=1,
            hmc=HmcConfig(total_samples=500, burn_in=250),
        )
        params.update(overrides)
        return cls(**params)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "m_contents": list(self.m_contents),
            "n_slots_grid": list(self.n_slots_grid),
            "trials": self.trials,
            "hmc": asdict(self.hmc),
            "priors": None
            if self.priors is None
            else {"shape": self.priors.shape.tolist(), "rate": self.priors.rate.tolist()},
            "true_params": self.true_params.tolist(),
            "seed": self.seed,
        }


@dataclass
class TrialResult:
    m_contents: int
    n_slots: int
    trial: int
    failed: bool = False
    sq_err_type1: float = np.nan  # mean over contents
    sq_err_mle: float = np.nan
    sq_err_type2: float = np.nan  # single held-out content
    theta_mean: np.ndarray = None
    acceptance_rate: float = np.nan


@dataclass
class RmseCell:
    m_contents: int
    n_slots: int
    trial_count: int
    failed_trials: int
    rmse_bayes_type1: float
    se_bayes_type1: float
    rmse_mle: float
    se_mle: float
    rmse_type2: float
    se_type2: float


@dataclass
class RmseReport:
    cells: list

    def cell(self, m_contents, n_slots):
        for c in self.cells:
            if c.m_contents == m_contents and c.n_slots == n_slots:
                return c
        raise KeyError((m_contents, n_slots))

    def rows(self):
        return [[getattr(c, col) for col in RMSE_COLUMNS] for c in self.cells]


@dataclass
class HyperRecoveryReport:
    true_params: np.ndarray
    n_slots_grid: tuple
    posterior_mean: dict  # (m, n) -> array of theta_0 .. theta_{Q+1}

    def rows(self):
        rows = []
        for m in sorted({m for m, _ in self.posterior_mean}):
            for q, true in enumerate(self.true_params):
                vals = [float(self.posterior_mean[m, n][q]) for n in self.n_slots_grid]
                rows.append([m, f"theta{q}", float(true)] + vals)
        return rows


def compute_rmse(estimates, truth):
    """Root mean squared error in the linear rate domain."""
    estimates = np.asarray(estimates, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if estimates.size != truth.size or estimates.size == 0:
        raise InvalidInputError(f"length mismatch: {estimates.size} estimates vs {truth.size} truths")
    return float(np.sqrt(np.mean((estimates - truth) ** 2)))


def trial_seed(seed, m_contents, trial):
    return int(np.random.SeedSequence([int(seed), int(m_contents), int(trial)]).generate_state(1)[0])


def make_trial_scenario(config, m_contents, trial):
    """Catalog scenario of ``m_contents`` items plus one held-out content.

    Returns ``(scenario, x_holdout, holdout_rate, seed)``.
    """
    seed = trial_seed(config.seed, m_contents, trial)
    full = gen_ground_truth(gen_features(m_contents + 1, seed), config.true_params, seed)
    scenario = SyntheticScenario(
        full.catalog[:m_contents],
        full.true_params,
        full.true_lambda[:m_contents],
        full.true_rates[:m_contents],
        seed,
    )
    return scenario, full.catalog[m_contents], float(full.true_rates[m_contents]), seed


def run_trial(config, m_contents, trial):
    """Fit every ``N`` of the grid for one synthetic scenario."""
    scenario, x_new, new_rate, seed = make_trial_scenario(config, m_contents, trial)
    results = []
    for n in config.n_slots_grid:
        res = TrialResult(m_contents, n, trial)
        history = gen_requests(scenario, n, seed)
        hmc = HmcConfig(**{**asdict(config.hmc), "rng_seed": int(stream(seed, "hmc", n).integers(2**63))})
        try:
            chain = fit(history, scenario.catalog, config.priors, hmc)
            type1 = predict_existing(chain).mean_rate
            type2 = predict_new_content(chain, x_new, scenario.catalog).mean_rate
        except PopGPError as exc:
            log.warning("trial %d (M=%d, N=%d) failed: %s", trial, m_contents, n, exc)
            res.failed = True
            results.append(res)
            continue
        res.sq_err_type1 = compute_rmse(type1, scenario.true_rates) ** 2
        res.sq_err_mle = compute_rmse(mle_rates(history).rates, scenario.true_rates) ** 2
        res.sq_err_type2 = (type2 - new_rate) ** 2
        res.theta_mean = chain.theta.mean(axis=0)
        res.acceptance_rate = chain.acceptance_rate
        log.info(
            "M=%d N=%d trial=%d acc=%.2f rmse1=%.4f mle=%.4f",
            m_contents, n, trial, res.acceptance_rate, res.sq_err_type1**0.5, res.sq_err_mle**0.5,
        )
        results.append(res)
    return results


def run_sweep(config):
    """All trials for every ``(M, N)`` cell, ordered by ``(M, trial, N)``."""
    results = []
    for m in config.m_contents:
        for t in range(config.trials):
            results.extend(run_trial(config, m, t))
    for m in config.m_contents:
        for n in config.n_slots_grid:
            cell = [r for r in results if r.m_contents == m and r.n_slots == n]
            failed = sum(r.failed for r in cell)
            if failed > MAX_FAILED_FRACTION * len(cell):
                raise ExperimentError(f"{failed} of {len(cell)} trials failed at M={m}, N={n}")
    return results


def _rmse_and_se(sq_errors):
    sq = np.asarray(sq_errors, dtype=float)
    rmse = float(np.sqrt(sq.mean()))
    if sq.size < 2 or rmse == 0:
        return rmse, float("nan")
    se_mse = sq.std(ddof=1) / np.sqrt(sq.size)
    return rmse, float(se_mse / (2.0 * rmse))


def aggregate_rmse(results, config):
    cells = []
    for m in config.m_contents:
        for n in config.n_slots_grid:
            ok = [r for r in results if r.m_contents == m and r.n_slots == n and not r.failed]
            failed = sum(1 for r in results if r.m_contents == m and r.n_slots == n and r.failed)
            if not ok:
                raise ExperimentError(f"no successful trials at M={m}, N={n}")
            b = _rmse_and_se([r.sq_err_type1 for r in ok])
            mle = _rmse_and_se([r.sq_err_mle for r in ok])
            t2 = _rmse_and_se([r.sq_err_type2 for r in ok])
            cells.append(RmseCell(m, n, len(ok), failed, *b, *mle, *t2))
    return RmseReport(cells)


def aggregate_hyper(results, config):
    means = {}
    for m in config.m_contents:
        for n in config.n_slots_grid:
            ok = [r.theta_mean for r in results if r.m_contents == m and r.n_slots == n and not r.failed]
            if not ok:
                raise ExperimentError(f"no successful trials at M={m}, N={n}")
            means[m, n] = np.mean(ok, axis=0)
    return HyperRecoveryReport(config.true_params, config.n_slots_grid, means)


def write_rmse_report(path, report):
    write_csv(path, RMSE_COLUMNS, report.rows())


def write_hyper_report(path, report):
    write_csv(path, table_columns(report.n_slots_grid), report.rows())


def _maybe_write(out_dir, name, writer, report):
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        writer(out / name, report)


def run_fig2(config, out_dir=None, results=None):
    """Catalog popularity RMSE (Bayesian vs MLE) across the ``N`` grid."""
    report = aggregate_rmse(results if results is not None else run_sweep(config), config)
    _maybe_write(out_dir, "fig2_rmse.csv", write_rmse_report, report)
    return report


def run_fig3(config, out_dir=None, results=None):
    """Held-out content popularity RMSE across the ``N`` grid."""
    report = aggregate_rmse(results if results is not None else run_sweep(config), config)
    _maybe_write(out_dir, "fig3_rmse.csv", write_rmse_report, report)
    return report


def run_tables(config, out_dir=None, results=None):
    """Trial-averaged posterior mean of every kernel parameter per ``(M, N)``."""
    report = aggregate_hyper(results if results is not None else run_sweep(config), config)
    _maybe_write(out_dir, "tables_theta.csv", write_hyper_report, report)
    return report
