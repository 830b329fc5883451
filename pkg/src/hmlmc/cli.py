"""Command-line entry point.

Loads a TOML run configuration, applies any command-line overrides, runs the
tolerance sweep, and writes the result files.  Exit codes: 0 on success, 2 on
configuration problems, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import Sequence

from .errors import ConfigurationError, NumericalError
from .experiment import emit_outputs, load_config, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmlmc",
        description=(
            "Hybrid multilevel Monte Carlo simulator for steady-state "
            "particle transport in a 1-D slab."
        ),
    )
    parser.add_argument(
        "--config", required=True, help="path to a TOML run configuration"
    )
    parser.add_argument(
        "--epsilon",
        help="comma-separated tolerance list overriding the config",
    )
    parser.add_argument(
        "--histories", type=int, help="histories per sample on every level"
    )
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument(
        "--parallelism", type=int, help="number of worker threads for tallies"
    )
    parser.add_argument(
        "--cost-mode",
        choices=("measured", "proxy"),
        help="per-sample cost measure: wall time or deterministic proxy",
    )
    parser.add_argument("--out", help="output directory overriding the config")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = {}
        if args.epsilon is not None:
            try:
                overrides["epsilons"] = tuple(
                    float(item) for item in args.epsilon.split(",")
                )
            except ValueError as exc:
                raise ConfigurationError(
                    f"invalid --epsilon value {args.epsilon!r}: {exc}"
                ) from exc
        if args.histories is not None:
            overrides["histories"] = args.histories
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.parallelism is not None:
            overrides["parallelism"] = args.parallelism
        if args.cost_mode is not None:
            overrides["cost_mode"] = args.cost_mode
        if args.out is not None:
            overrides["output_dir"] = args.out
        if overrides:
            config = dataclasses.replace(config, **overrides)
    except ConfigurationError as exc:
        print(f"hmlmc: configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        bundle = run_experiment(config)
    except ConfigurationError as exc:
        print(f"hmlmc: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"hmlmc: numerical failure: {exc}", file=sys.stderr)
        return 3

    emit_outputs(bundle, config.output_dir)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
