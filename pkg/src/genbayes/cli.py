"""Command-line interface.

Subcommands
-----------
simulate      generate (or ingest) a dataset from the configured model
calibrate     bootstrap-calibrate the loss weight on that dataset
sample        draw posterior chains (calibrating first when beta="auto")
experiment    run a full suite: cmp | ising | pgm | robustness | cost
ingest-check  validate a count-data CSV and report its shape

Common flags: --config <path> (JSON overrides), --seed <u64>, --out <dir>,
--beta <float|auto>, --threads <k>.  Flags win over config-file entries.

Exit codes: 0 success, 1 configuration or input error, 2 calibration error.
"""

import argparse
import json
import sys

from .calibration import CalibrationError
from .experiments import (
    RUNNERS,
    ConfigError,
    ingest_counts,
    run_calibrate,
    run_sample,
    run_simulate,
)

_EXPERIMENTS = ("cmp", "ising", "pgm", "robustness", "cost")


def _add_common(sp):
    sp.add_argument("--config", metavar="PATH",
                    help="JSON file of config overrides")
    sp.add_argument("--seed", type=int, metavar="U64",
                    help="master seed (wins over the config file)")
    sp.add_argument("--out", required=True, metavar="DIR",
                    help="output directory (created if missing)")
    sp.add_argument("--beta", metavar="B",
                    help='loss weight: a number, or "auto" to calibrate')
    sp.add_argument("--threads", type=int, metavar="K",
                    help="worker threads for chains and bootstrap "
                         "(default 1)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="genbayes",
        description="Generalised Bayesian inference for discrete models "
                    "with intractable normalising constants.")
    sub = parser.add_subparsers(dest="command")
    sub.required = True

    _add_common(sub.add_parser(
        "simulate", help="generate a dataset from the configured model"))
    _add_common(sub.add_parser(
        "calibrate", help="bootstrap-calibrate the loss weight"))
    _add_common(sub.add_parser(
        "sample", help="draw posterior chains (no predictive stage)"))

    exp = sub.add_parser("experiment", help="run a full experiment suite")
    exp.add_argument("name", choices=_EXPERIMENTS,
                     help="which suite to run")
    _add_common(exp)

    chk = sub.add_parser(
        "ingest-check",
        help="validate a count-data CSV and report its shape")
    chk.add_argument("path", help="CSV file to validate")
    return parser


def _gather(args):
    """Merge the config file and flags into (overrides, seed, threads)."""
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("%s: config must be a JSON object"
                              % args.config)
        overrides.update(loaded)
    threads = overrides.pop("threads", 1)
    if args.threads is not None:
        threads = args.threads
    threads = int(threads)
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    seed = overrides.get("seed")
    if args.seed is not None:
        seed = args.seed
    if args.beta is not None:
        if args.beta == "auto":
            overrides["beta"] = "auto"
        else:
            try:
                overrides["beta"] = float(args.beta)
            except ValueError:
                raise ConfigError(
                    '--beta must be a number or "auto", got %r'
                    % args.beta) from None
    return overrides, seed, threads


def _report_summaries(result):
    for key, s in result.get("summaries", {}).items():
        if isinstance(s, dict) and "posterior_mean" in s:
            mean = ", ".join("%.4g" % v for v in s["posterior_mean"])
            print("%s: beta=%.6g posterior_mean=[%s]"
                  % (key, s["beta"], mean))
        elif key == "cost":
            print("cost: slope_dfd=%.3f slope_ksd=%.3f"
                  % (s["slope_dfd"], s["slope_ksd"]))
        elif key == "robustness":
            for loss_name, row in s.items():
                print("robustness %s: shift=%.4g beta=%.6g"
                      % (loss_name, row["shift"], row["beta"]))
    print("outputs: %s" % result["out_dir"])


def _dispatch(args):
    if args.command == "ingest-check":
        data = ingest_counts(args.path)
        print("n=%d d=%d" % (data.n, data.d))
        return 0
    overrides, seed, threads = _gather(args)
    if args.command == "simulate":
        result = run_simulate(overrides, seed, args.out, threads=threads)
        print("n=%d d=%d" % (result["n"], result["d"]))
        print("outputs: %s" % result["out_dir"])
    elif args.command == "calibrate":
        result = run_calibrate(overrides, seed, args.out, threads=threads)
        for loss_name, beta in result["betas"].items():
            print("beta_star[%s]=%.10g" % (loss_name, beta))
        print("outputs: %s" % result["out_dir"])
    elif args.command == "sample":
        result = run_sample(overrides, seed, args.out, threads=threads)
        _report_summaries(result)
    else:
        result = RUNNERS[args.name](overrides, seed, args.out,
                                    threads=threads)
        _report_summaries(result)
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return _dispatch(args)
    except CalibrationError as err:
        print("calibration error: %s" % err, file=sys.stderr)
        return 2
    except (ConfigError, OSError, ValueError) as err:
        print("error: %s" % err, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
