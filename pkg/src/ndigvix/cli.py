"""Command-line front end. Exit codes: 0 success, 2 validation error, 3 numerical failure."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, PipelineConfig
from .pipeline import EXIT_VALIDATION, STAGES, run_pipeline

COMMANDS = {
    "gen": ("gen",),
    "calibrate": ("calibrate",),
    "price": ("price",),
    "vix": ("vix",),
    "fit-ts": ("fit-ts",),
    "shocks": ("shocks",),
    "simulate": ("simulate",),
    "run": STAGES,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key-value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--window", type=int, help="calibration window length")
    common.add_argument("--step", type=int, help="calibration window step")
    common.add_argument("--levels", type=float, nargs=2, metavar=("BETA", "GAMMA"), help="ratio tail levels")
    common.add_argument("--scenarios", type=int, help="number of simulated scenarios")
    common.add_argument("--returns", help="returns CSV (date,close or date,log_return)")
    common.add_argument("--chain", help="option chain CSV")
    common.add_argument("--rates", help="rates CSV (date,r)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ndigvix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    beta, gamma = args.levels if args.levels else (None, None)
    return cfg.with_(seed=args.seed, out=args.out, window=args.window, step=args.step, beta=beta,
                     gamma=gamma, scenarios=args.scenarios, returns=args.returns, chain=args.chain,
                     rates=args.rates)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    report = run_pipeline(cfg, COMMANDS[args.command])
    if report.exit_code:
        print(f"error: {report.message}", file=sys.stderr)
    elif report.manifest is not None:
        print(report.manifest)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
