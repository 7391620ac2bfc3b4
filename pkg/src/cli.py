"""
Command-line interface: subcommands, flags and exit codes.
"""
import argparse
import logging
from typing import List, Optional

from rich.markup import escape

from .config import DEFAULT_LOG_LEVEL, load_run_config
from .exceptions import ConfigurationError, IngestError, MissingArtifactError, MissingInputError, VibrancyError
from .manager import COMMANDS, PipelineManager
from .utils import console, setup_logging

logger = logging.getLogger("vibrancy.cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130

# errors the user fixes by changing inputs or running another command first
USAGE_ERRORS = (ConfigurationError, MissingInputError, MissingArtifactError, IngestError)


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return number


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=_seed, help="run seed (synthetic cities)")
    common.add_argument("--alpha", type=float, help="trend significance level")
    common.add_argument("--caliper", type=float, help="matching caliper in SDs of the matching distance")
    common.add_argument("--jobs", type=_positive_int, help="worker threads")
    common.add_argument("--log-level", default=DEFAULT_LOG_LEVEL, help="logging level (default: %(default)s)")

    parser = argparse.ArgumentParser(
        prog="vibrancy",
        description="Neighborhood community vibrancy and crime analysis",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "synth": "generate a synthetic city input bundle",
        "ingest": "parse inputs and assign events to block groups",
        "measures": "build vibrancy and crime measures",
        "trends": "classify per block group yearly trends",
        "regress": "fit the regression models",
        "match": "run the propensity score matching experiments",
        "report": "bundle every artifact into the report directory",
        "all": "run the whole pipeline",
    }
    for command in COMMANDS + ("all",):
        subparsers.add_parser(command, parents=[common], help=helps[command])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    Returns:
        int: 0 on success, 2 for configuration, input and missing-artifact
        errors, 1 for other failures, 130 when interrupted
    """
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_level)
    except ValueError:
        console.print(f"[red]Error: unknown log level {escape(args.log_level)}[/red]")
        return EXIT_USAGE

    try:
        config = load_run_config(args.config).with_overrides(
            out=args.out, seed=args.seed, alpha=args.alpha, caliper=args.caliper, jobs=args.jobs,
        )
        PipelineManager(config).run(args.command)
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted[/yellow]")
        return EXIT_INTERRUPTED
    except USAGE_ERRORS as e:
        console.print(f"[red]Error: {escape(str(e))}[/red]")
        return EXIT_USAGE
    except VibrancyError as e:
        console.print(f"[red]Error: {escape(str(e))}[/red]")
        return EXIT_ERROR
    return EXIT_OK
