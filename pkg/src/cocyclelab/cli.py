"""Command line entry point: one subcommand per experiment kind.

Exit codes: 0 success, 2 config validation failure, 3 numerical failure
(partial outputs are still written).
"""

from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENT_KINDS, ConfigError, ExperimentConfig, validate_config
from .runner import NumericalFailure, run_experiment

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cocyclelab",
        description="Numerical workbench for cocycles over SL(2,R) actions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--threads", type=int, default=None, help="worker pool size")
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = validate_config(text)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    if config.experiment != args.command:
        print(
            f"config error: config is for {config.experiment!r} but the "
            f"{args.command!r} subcommand was invoked",
            file=sys.stderr,
        )
        return 2
    if args.seed is not None:
        config = ExperimentConfig(config.experiment, args.seed, config.threads, config.out, config.values)
    if args.threads is not None:
        config = ExperimentConfig(config.experiment, config.seed, args.threads, config.out, config.values)
    if args.out is not None:
        config = ExperimentConfig(config.experiment, config.seed, config.threads, args.out, config.values)
    try:
        record = run_experiment(config)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"ok: {record.experiment} ({record.config_hash[:12]}) -> {record.outputs[0]}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
