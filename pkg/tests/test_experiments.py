import csv
import math

import numpy as np
import pytest

from popgp.errors import InvalidInputError
from popgp.experiments import (
    RMSE_COLUMNS,
    ExperimentConfig,
    ExperimentError,
    TrialResult,
    aggregate_rmse,
    compute_rmse,
    make_trial_scenario,
    run_fig2,
    run_fig3,
    run_sweep,
    run_tables,
    table_columns,
)
from popgp.sampler import HmcConfig


class TestComputeRmse:
    def test_perfect(self):
        assert compute_rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_hand_value(self):
        assert compute_rmse([0, 0], [3, 4]) == pytest.approx(2.5 * math.sqrt(2), rel=1e-15)

    def test_scalar_loop(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=17), rng.normal(size=17)
        acc = 0.0
        for x, y in zip(a, b):
            acc += (x - y) ** 2
        assert compute_rmse(a, b) == pytest.approx(math.sqrt(acc / 17), rel=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            compute_rmse([1.0], [1.0, 2.0])


def tiny_config(**kw):
    params = dict(m_contents=(10,), n_slots_grid=(25,), trials=1, hmc=HmcConfig(total_samples=200, burn_in=100), seed=3)
    params.update(kw)
    return ExperimentConfig(**params)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_smoke_fig2_row(tmp_path):
    report = run_fig2(tiny_config(), out_dir=tmp_path)
    rows = read_csv(tmp_path / "fig2_rmse.csv")
    assert tuple(rows[0]) == RMSE_COLUMNS
    assert len(rows) == 2
    cell = report.cell(10, 25)
    assert cell.trial_count == 1 and cell.failed_trials == 0
    assert cell.rmse_bayes_type1 > 0 and cell.rmse_mle > 0
    assert math.isnan(cell.se_mle)  # single trial has no spread


def test_fig3_and_tables_share_one_sweep(tmp_path):
    config = tiny_config(n_slots_grid=(25, 50), trials=2)
    results = run_sweep(config)
    assert len(results) == 4
    fig3 = run_fig3(config, out_dir=tmp_path, results=results)
    assert all(c.rmse_type2 >= 0 for c in fig3.cells)
    tables = run_tables(config, out_dir=tmp_path, results=results)
    rows = read_csv(tmp_path / "tables_theta.csv")
    assert tuple(rows[0]) == table_columns((25, 50))
    assert [r[1] for r in rows[1:]] == [f"theta{q}" for q in range(6)]
    assert np.all(tables.posterior_mean[10, 50] > 0)


def test_sweep_is_deterministic():
    a = run_sweep(tiny_config())
    b = run_sweep(tiny_config())
    assert a[0].sq_err_type1 == b[0].sq_err_type1
    assert a[0].theta_mean.tobytes() == b[0].theta_mean.tobytes()


def test_holdout_is_part_of_a_joint_draw():
    config = tiny_config()
    sc, x_new, rate, seed = make_trial_scenario(config, 10, 0)
    assert sc.catalog.shape == (10, 4) and x_new.shape == (4,) and rate > 0
    sc2, *_ = make_trial_scenario(config, 10, 1)
    assert sc.catalog.tobytes() != sc2.catalog.tobytes()


def test_standard_error_shrinks_with_trials():
    rng = np.random.default_rng(0)

    def results(n):
        return [
            TrialResult(5, 10, t, sq_err_type1=v, sq_err_mle=v, sq_err_type2=v)
            for t, v in enumerate(rng.exponential(1.0, size=n))
        ]

    config = ExperimentConfig(m_contents=(5,), n_slots_grid=(10,), trials=5)
    se5 = np.mean([aggregate_rmse(results(5), config).cells[0].se_mle for _ in range(200)])
    se20 = np.mean([aggregate_rmse(results(20), config).cells[0].se_mle for _ in range(200)])
    assert se20 < se5
    assert se20 / se5 == pytest.approx(0.5, abs=0.15)


def test_too_many_failures_abort(monkeypatch):
    from popgp import experiments
    from popgp.errors import NumericalError

    def broken(*a, **k):
        raise NumericalError("boom")

    monkeypatch.setattr(experiments, "fit", broken)
    with pytest.raises(ExperimentError, match="failed"):
        run_sweep(tiny_config())


def test_config_round_trip(tmp_path):
    config = tiny_config(n_slots_grid=(5, 10))
    again = ExperimentConfig.from_dict(config.to_dict())
    assert again.to_dict() == config.to_dict()
    with pytest.raises(InvalidInputError, match="unknown"):
        ExperimentConfig.from_dict({"m_contents": [5], "bogus": 1})
    with pytest.raises(InvalidInputError):
        ExperimentConfig(n_slots_grid=(50, 25))


# -- reference sweeps (shared with the acceptance module) --------------------


@pytest.mark.slow
def test_type2_error_mostly_decreasing_over_grid(sweep_m50):
    config, results = sweep_m50
    rmse = [c.rmse_type2 for c in aggregate_rmse(results, config).cells]
    inversions = int(np.sum(np.diff(rmse) > 0))
    assert inversions <= 1, rmse


@pytest.mark.slow
def test_type2_error_not_worse_with_more_contents(sweep_m50, sweep_m100):
    r50 = aggregate_rmse(sweep_m50[1], sweep_m50[0]).cell(50, 400).rmse_type2
    r100 = aggregate_rmse(sweep_m100[1], sweep_m100[0]).cell(100, 400).rmse_type2
    assert r100 <= r50


@pytest.mark.slow
def test_theta5_moves_towards_truth(sweep_m100):
    config, results = sweep_m100
    means = run_tables(config, results=results).posterior_mean
    assert abs(means[100, 400][5] - 0.5) < abs(means[100, 25][5] - 0.5)
