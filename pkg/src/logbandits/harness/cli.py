"""Command-line entry point: ``logbandits <kind> --config PATH``."""

from __future__ import annotations

import argparse
import sys

from ..errors import InvalidConfig
from .config import ExperimentConfig, ExperimentKind
from .runner import EXIT_CONFIG, run_experiment


def build_parser():
    parser = argparse.ArgumentParser(prog="logbandits", description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in ExperimentKind:
        p = sub.add_parser(kind.value, help=f"run a {kind.value} experiment")
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
        p.add_argument("--out", default=None, help="output prefix (overrides the config)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config, kind=args.kind)
        cfg = cfg.with_overrides(args.seed_offset, args.out)
        if args.jobs < 1:
            raise InvalidConfig("--jobs must be positive")
        status = run_experiment(cfg, jobs=args.jobs)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {cfg.out}.summary.csv ({'ok' if status == 0 else 'with failures'})")
    return status


if __name__ == "__main__":
    sys.exit(main())
