"""Command-line entry point: ``stagerl {validate,solve,train,sweep}``."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from stagerl.config import ConfigError, ExperimentConfig
from stagerl.core import Experiment
from stagerl.gridnav import LayoutError, StateSpaceError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_ALL_DIVERGED = 3

COMMANDS = ("validate", "solve", "train", "sweep")


def _seed_list(text: str) -> Tuple[int, ...]:
    try:
        seeds = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"Seeds must be comma-separated integers: {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("At least one seed is required")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(
        prog="stagerl",
        description="Multi-stage reward guidance: nesting checks, oracle solves, "
        "training runs and critical-period sweeps",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only")

    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "Check support and optimality nesting of the guidance stack",
        "solve": "Solve one layout exactly and write values and optimal actions",
        "train": "Run one training run under the first configured schedule",
        "sweep": "Sweep schedules and seeds and locate the critical period",
    }
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=helps[name])
        sub.add_argument("--config", metavar="PATH", help="JSON configuration file")
        sub.add_argument("--out", metavar="DIR", help="Run directory (overrides output.directory)")
        sub.add_argument(
            "--workers", type=int, metavar="N", help="Sweep worker processes (overrides config)"
        )
        sub.add_argument(
            "--seed-override",
            type=_seed_list,
            metavar="K",
            help="Comma-separated trainer seeds replacing the configured list",
        )
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _load(args: argparse.Namespace) -> Experiment:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    config = config.with_overrides(
        directory=args.out, workers=args.workers, seeds=args.seed_override
    )
    return Experiment(config)


def _report(paths: List[Path]) -> None:
    for path in paths:
        logger.info("Wrote %s", path)


def _dispatch(command: str, experiment: Experiment) -> int:
    if command == "validate":
        result = experiment.validate()
        _report(experiment.write_validation(result))
        if not result.ok:
            logger.warning("Nesting violations found")
            return EXIT_VALIDATION_FAILED
    elif command == "solve":
        _report(experiment.write_solution(experiment.solve()))
    elif command == "train":
        _report(experiment.write_training(experiment.train()))
    else:
        outcome = experiment.sweep()
        _report(experiment.write_sweep(outcome))
        if outcome.all_diverged:
            return EXIT_ALL_DIVERGED
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return the exit code.

    Exit codes: 0 ok, 1 nesting violations found, 2 invalid configuration
    (including layouts or state spaces it cannot build), 3 no multi-stage
    schedule converged.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)

    try:
        experiment = _load(args)
    except (ConfigError, ValueError) as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_CONFIG_ERROR

    logger.info("%s: %s", args.command, experiment.describe())
    try:
        return _dispatch(args.command, experiment)
    except (LayoutError, StateSpaceError, ValueError) as exc:
        logger.error("%s failed: %s: %s", args.command, type(exc).__name__, exc)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
