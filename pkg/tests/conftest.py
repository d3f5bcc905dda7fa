import sys

import pytest

from popgp.experiments import ExperimentConfig, run_sweep
from popgp.sampler import HmcConfig

#: Base seed of the reference sweeps, fixed before any sweep result was inspected.
SWEEP_SEED = 2024
#: Shorter chains than the interactive default; enough for the trial-averaged RMSE orderings.
SWEEP_HMC = HmcConfig(total_samples=2000, burn_in=1000)

SWEEP_GRIDS = {50: (25, 50, 100, 200, 400), 100: (25, 100, 400)}

_sweeps = {}


def reference_sweep(m_contents):
    """``(config, results)`` for the 20-trial reference sweep at ``m_contents``; computed once per session."""
    if m_contents not in _sweeps:
        config = ExperimentConfig(
            m_contents=(m_contents,),
            n_slots_grid=SWEEP_GRIDS[m_contents],
            trials=20,
            hmc=SWEEP_HMC,
            seed=SWEEP_SEED,
        )
        _sweeps[m_contents] = (config, run_sweep(config))
    return _sweeps[m_contents]


@pytest.fixture(scope="session")
def sweep_m50():
    return reference_sweep(50)


@pytest.fixture(scope="session")
def sweep_m100():
    return reference_sweep(100)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
