"""Command line entry point: ``levydrift <suite> [--config F] [--out D] [--seed S] [--parallel K]``.

Exit status is 0 when every check passes, 1 when some check fails and 2 on
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import io
from .config import SUITES, parse_experiment
from .exceptions import ConfigError, LevyDriftError
from .suites import ANCHORS, run_suite

log = logging.getLogger("levydrift")


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="levydrift", description="Run a numerical experiment suite.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="suite", metavar="SUITE", required=True)
    for name in SUITES:
        sp = sub.add_parser(name, help=ANCHORS[name])
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--out", help="output directory (default out_<suite>)")
        sp.add_argument("--seed", type=_u64, help="overrides the seed in the config")
        sp.add_argument("--parallel", type=_positive, default=1, help="worker threads for ensemble members")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        items = io.read_kv(args.config) if args.config else {}
        if "suite" in items and items["suite"] != args.suite:
            raise ConfigError("suite", f"config says {items['suite']!r} but subcommand is {args.suite!r}")
        cfg = parse_experiment(items, suite=args.suite, seed=args.seed, out=args.out)
    except OSError as exc:
        print(f"levydrift: cannot read config: {exc}", file=sys.stderr)
        return 2
    except LevyDriftError as exc:
        print(f"levydrift: config error: {exc}", file=sys.stderr)
        return 2
    try:
        status, summary = run_suite(cfg, parallel=args.parallel)
    except ConfigError as exc:
        print(f"levydrift: config error: {exc}", file=sys.stderr)
        return 2
    except LevyDriftError as exc:
        print(f"levydrift: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for c in summary["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {cfg.suite}.{c['name']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
