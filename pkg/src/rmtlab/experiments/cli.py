"""Command line entry point: ``rmtlab {sample,fit,theory,report}``.

Exit codes: 0 success, 2 configuration/coverage error, 3 numerical failure.
``RMT_THREADS`` overrides the ``threads`` setting of a config.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .runner import NumericalFailure, run_fit, run_report, run_sampling, run_theory_table

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmtlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw replicates and write samples.csv")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: output_dir of the config)")

    p = sub.add_parser("fit", help="estimate 1/N coefficients; writes fits.csv and report.csv")
    p.add_argument("--samples", required=True)
    p.add_argument("--model", choices=("null", "paper"), default="null")
    p.add_argument("--out", help="output directory (default: next to the samples)")

    p = sub.add_parser("theory", help="tabulate limit and corrected cdfs as theory.csv")
    p.add_argument("--config", required=True)
    p.add_argument("--model", choices=("null", "paper"), default="paper")
    p.add_argument("--out", help="output file (default: <output_dir>/theory.csv)")

    p = sub.add_parser("report", help="kurtosis regression over an existing fits.csv")
    p.add_argument("--fits", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sample":
            print(run_sampling(load_config(args.config), args.out))
        elif args.command == "fit":
            for path in run_fit(args.samples, args.model, args.out):
                print(path)
        elif args.command == "theory":
            print(run_theory_table(load_config(args.config), args.model, args.out))
        else:
            path, rows = run_report(args.fits)
            print(f"{'x':>12} {'slope':>12} {'intercept':>12} {'r2':>8}")
            for x, slope, intercept, r2 in rows:
                print(f"{x:12.6g} {slope:12.6g} {intercept:12.6g} {r2:8.4f}")
            print(path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
