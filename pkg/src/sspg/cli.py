"""Command-line front end.

`sspg run --config file.json` executes any experiment from a JSON config;
`sspg rates` and `sspg cfp` are shorthands that build the corresponding
config from flags.  Exit codes: 0 all verdicts passed, 1 some verdict
failed, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import os
import sys

from .experiments import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    load_config,
    run_experiment,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output directory (default sspg_runs/<experiment>)")
    p.add_argument("--plot", action="store_true", help="also write SVG charts")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes for seed-averaged runs")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sspg", description="stochastic splitting proximal gradient experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment described by a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    _add_common(p_run)

    p_rates = sub.add_parser("rates", help="decay-exponent sweep over stepsize schedules")
    p_rates.add_argument("--gamma", type=float, action="append", default=None,
                         help="schedule exponent; repeat for several (default 0.5 0.75)")
    p_rates.add_argument("--seeds", type=int, default=None, help="number of replicas")
    p_rates.add_argument("--horizon", type=int, default=None,
                         help="iterations per replica (fit window ends here)")
    p_rates.add_argument("--seed", type=int, default=0, help="base seed")
    _add_common(p_rates)

    p_cfp = sub.add_parser("cfp", help="feasibility: randomized projections onto two lines")
    p_cfp.add_argument("--angle", type=float, default=None,
                       help="angle between the lines in radians (default pi/3)")
    p_cfp.add_argument("--seeds", type=int, default=None, help="number of replicas")
    p_cfp.add_argument("--horizon", type=int, default=None, help="iterations per replica")
    p_cfp.add_argument("--samples", type=int, default=None,
                       help="sample count for the regularity-constant estimate")
    p_cfp.add_argument("--seed", type=int, default=0, help="base seed")
    _add_common(p_cfp)
    return parser


def _shorthand_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.command == "rates":
        params: dict = {}
        if args.gamma:
            params["gammas"] = args.gamma
        if args.seeds is not None:
            params["seeds"] = args.seeds
        if args.horizon is not None:
            params["horizon"] = args.horizon
            params["window"] = [min(100, max(1, args.horizon // 2)), args.horizon]
        experiment = "rate_sweep"
    else:
        params = {}
        if args.angle is not None:
            params["angle"] = args.angle
        if args.seeds is not None:
            params["seeds"] = args.seeds
        if args.horizon is not None:
            params["horizon"] = args.horizon
        if args.samples is not None:
            params["kappa_samples"] = args.samples
        experiment = "cfp_linear"
    return config_from_dict({
        "format_version": 1,
        "experiment": experiment,
        "seed": args.seed,
        "params": params,
    })


def _execute(config: ExperimentConfig, args: argparse.Namespace) -> int:
    out = args.out or os.path.join("sspg_runs", config.experiment)
    manifest = run_experiment(config, out, plot=args.plot, workers=args.threads)
    for v in manifest["verdicts"]:
        status = "PASS" if v["passed"] else "FAIL"
        print(f"[{status}] {v['name']}: {v['detail']}")
    n_fail = sum(not v["passed"] for v in manifest["verdicts"])
    print(f"wrote {out}/manifest.json ({len(manifest['artifacts'])} artifacts); "
          f"{'all verdicts passed' if n_fail == 0 else f'{n_fail} verdict(s) failed'}")
    return 0 if manifest["all_passed"] else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config)
        else:
            config = _shorthand_config(args)
        return _execute(config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run_default(experiment: str, argv=None) -> int:
    """Run one experiment kind at its default parameters (used by scripts/)."""
    parser = argparse.ArgumentParser(
        description=f"run the {experiment} experiment at default parameters")
    parser.add_argument("--seed", type=int, default=0, help="base seed")
    _add_common(parser)
    args = parser.parse_args(argv)
    try:
        config = config_from_dict({
            "format_version": 1, "experiment": experiment, "seed": args.seed,
        })
        return _execute(config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
