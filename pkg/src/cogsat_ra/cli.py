"""Command-line entry point: ``cogsat-ra <experiment> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import EXPERIMENTS, parse_config
from .errors import CogSatError
from .experiments import run

log = logging.getLogger("cogsat_ra")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cogsat-ra", description=__doc__)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat 'key = value' configuration file")
    p.add_argument("--L", nargs="+", help="PU counts to sweep (space or comma separated)")
    p.add_argument("--lambda", dest="lambda_", help="asymptotic index L/K ('none' to disable)")
    p.add_argument("--beta", help="scaling exponent, K = floor(L**beta)")
    p.add_argument("--epsilon")
    p.add_argument("--trials")
    p.add_argument("--seed")
    p.add_argument("--workers")
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    p.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    overrides = {"L": ",".join(args.L) if args.L else None, "lambda": args.lambda_, "beta": args.beta,
                 "epsilon": args.epsilon, "trials": args.trials, "seed": args.seed,
                 "workers": args.workers, "out": args.out}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        overrides[key.strip()] = value.strip()
    try:
        cfg = parse_config(args.config, overrides, args.experiment)
    except CogSatError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(cfg.emit())
        return 0
    for line in cfg.emit().splitlines():
        log.info("config %s", line)
    try:
        paths, tripped = run(cfg)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        log.info("wrote %s", p)
    for msg in tripped:
        log.error("invariant tripped: %s", msg)
    return 3 if tripped else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
