"""Command line entry point: ``csitshare run|calibrate|verify``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .harness import ConfigError, SimConfig, _feedback_dims, run_experiment
from .ia import InfeasibleError
from .perturbation import CalibrationCache
from .quantizer import ResourceError
from .verify import run_all

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_RESOURCE = 4
EXIT_EXCLUSIONS = 5


def _load_config(args):
    cfg = SimConfig.from_json(args.config) if args.config else SimConfig()
    over = cfg.to_dict()
    if args.seed is not None:
        over["seed"] = args.seed
    if args.mode is not None:
        over["csit_mode"] = args.mode
        if args.mode == "nc_cgq":
            over["precoder_mode"] = "vectorized"
    return SimConfig.from_dict(over)


def cmd_run(args):
    cfg = _load_config(args)
    curve = run_experiment(cfg, threads=args.threads)
    text = curve.to_csv()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not curve.valid:
        logging.error("more than 2%% of trials failed to align; results flagged invalid")
        return EXIT_EXCLUSIONS
    return EXIT_OK


def cmd_calibrate(args):
    cfg = _load_config(args)
    cache = CalibrationCache(args.out)
    out = {}
    for n, p in _feedback_dims(cfg):
        c = cache.get(n, p, cfg.seed, cfg.calibration_bits, cfg.calibration_queries)
        out[f"G({n},{p})"] = c
    print(json.dumps(out, indent=1))
    return EXIT_OK


def cmd_verify(args):
    results = run_all(0 if args.seed is None else args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def build_parser():
    parser = argparse.ArgumentParser(prog="csitshare", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in (
        ("run", cmd_run, "run a Monte Carlo sum-rate experiment"),
        ("calibrate", cmd_calibrate, "estimate ball-volume coefficients for the perturbation surrogate"),
        ("verify", cmd_verify, "run the randomized identity checks"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", help="output path (CSV for run, JSON cache for calibrate)")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--mode", choices=["perfect", "rvq", "perturbation", "nc_cgq"],
                       help="override csit_mode")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        logging.error("config error: %s", exc)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        logging.error("infeasible dimensions: %s", exc)
        return EXIT_INFEASIBLE
    except ResourceError as exc:
        logging.error("%s", exc)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
