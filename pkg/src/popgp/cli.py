"""Command-line entry point: ``popgp {fig2,fig3,tables,simulate,fit,predict}``.

On failure the last line written to stderr is ``error: {json}`` with the
exception type and message, and the exit status is non-zero.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .errors import PopGPError
from .experiments import ExperimentConfig, run_fig2, run_fig3, run_sweep, run_tables
from .inference import fit
from .predict import QUANTILE_LEVELS, predict_existing, predict_new_content
from .sampler import HmcConfig
from .synthetic import REFERENCE_THETA, gen_features, gen_ground_truth, gen_requests

log = logging.getLogger("popgp")


def _experiment_config(args):
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    elif args.smoke:
        config = ExperimentConfig.smoke()
    else:
        config = ExperimentConfig()
    if args.smoke and args.config:
        config = ExperimentConfig.smoke(
            true_params=config.true_params, priors=config.priors, seed=config.seed
        )
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.trials = args.trials
    if args.samples is not None:
        config.hmc = replace(config.hmc, total_samples=args.samples, burn_in=args.samples // 2)
    return config


def _hmc_config(args):
    samples = args.samples or HmcConfig.total_samples
    burn_in = args.burn_in if args.burn_in is not None else samples // 2
    return HmcConfig(
        step_size=args.step_size,
        leapfrog_steps=args.leapfrog,
        total_samples=samples,
        burn_in=burn_in,
        rng_seed=args.seed or 0,
    )


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_experiment(args):
    config = _experiment_config(args)
    out = _out_dir(args)
    results = run_sweep(config)
    runner = {"fig2": run_fig2, "fig3": run_fig3, "tables": run_tables}[args.command]
    runner(config, out_dir=out, results=results)
    with open(out / f"{args.command}_config.json", "w") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")


def cmd_simulate(args):
    seed = args.seed or 0
    theta = np.array(args.theta, dtype=float) if args.theta else REFERENCE_THETA
    scenario = gen_ground_truth(gen_features(args.m, seed), theta, seed)
    history = gen_requests(scenario, args.n, seed)
    out = _out_dir(args)
    io.save_scenario(out / "scenario.txt", scenario)
    io.save_catalog(out / "catalog.csv", scenario.catalog)
    io.save_requests(out / "requests.csv", history)


def cmd_fit(args):
    catalog = io.load_catalog(args.catalog)
    history = io.load_requests(args.requests)
    chain = fit(history, catalog, config=_hmc_config(args))
    out = _out_dir(args)
    io.save_chain(out / "chain.txt", chain)
    print(f"acceptance_rate={chain.acceptance_rate:.4f} retained={len(chain)}")


def cmd_predict(args):
    chain = io.load_chain(args.chain)
    catalog = io.load_catalog(args.catalog)
    out = _out_dir(args)
    pred = predict_existing(chain)
    qcols = [f"q{int(round(100 * q)):02d}" for q in QUANTILE_LEVELS]
    io.write_csv(
        out / "predict_existing.csv",
        ["content", "mean_rate"] + qcols,
        [[m, float(r)] + [float(v) for v in qs] for m, (r, qs) in enumerate(zip(pred.mean_rate, pred.quantiles))],
    )
    if args.new:
        rows = []
        for k, x in enumerate(io.load_catalog(args.new)):
            p = predict_new_content(chain, x, catalog)
            rows.append([k, p.mean_rate, p.corrected_mean_rate, p.clamped_count, p.skipped_count])
        io.write_csv(
            out / "predict_new.csv",
            ["content", "mean_rate", "lognormal_corrected_rate", "clamped", "skipped"],
            rows,
        )


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON file")
    common.add_argument("--seed", type=int, default=None, help="base random seed")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo trials per cell")
    common.add_argument("--smoke", action="store_true", help="tiny profile: M=10, N=25, S=500, 1 trial")
    common.add_argument("--samples", type=int, default=None, help="HMC samples per chain")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="popgp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("fig2", "catalog popularity RMSE, Bayesian vs MLE"),
        ("fig3", "held-out content popularity RMSE"),
        ("tables", "posterior means of the kernel parameters"),
    ]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic catalog and request history")
    p.add_argument("--m", type=int, default=50, help="number of contents")
    p.add_argument("--n", type=int, default=100, help="number of slots")
    p.add_argument("--theta", type=float, nargs="+", help="ground-truth kernel parameters")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="sample the posterior for a dataset")
    p.add_argument("--catalog", required=True)
    p.add_argument("--requests", required=True)
    p.add_argument("--step-size", type=float, default=HmcConfig.step_size)
    p.add_argument("--leapfrog", type=int, default=HmcConfig.leapfrog_steps)
    p.add_argument("--burn-in", type=int, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="posterior-predictive rates from a chain file")
    p.add_argument("--chain", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--new", help="CSV of feature vectors for unseen contents")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (PopGPError, OSError, ValueError) as exc:
        print("error: " + json.dumps({"type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
