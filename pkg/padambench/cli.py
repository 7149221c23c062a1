"""
Command line entry point ``padam-bench``.

    padam-bench run --problem heat_dkm --optimizer padam3 --out results/
    padam-bench list-presets
    padam-bench selftest

Exit codes: 0 success, 1 library or I/O error, 2 usage or configuration
error, 3 at least one seed diverged (its files are still written).
"""

import argparse
import logging
import sys
from typing import Sequence

from padambench import __version__, harness, selftest
from padambench.config import PRESETS, add_run_arguments, config_from_namespace
from padambench.errors import ConfigError, PadamBenchError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padam-bench",
        description="Benchmark Adam, PADAM and baseline optimizers on stochastic problems.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="errors only")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a multi-seed experiment")
    add_run_arguments(run)
    commands.add_parser("list-presets", help="show the built-in presets")
    commands.add_parser("selftest", help="run the invariant suite")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.WARNING
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.ERROR
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _list_presets() -> int:
    print(f"| {'preset':<20} | {'problem':<14} | {'steps':>7} | {'nt':>5} | {'seeds':>5} | lr")
    for name, preset in PRESETS.items():
        lrs = ", ".join(f"{key}={value:g}" for key, value in preset["lr_table"].items())
        print(
            f"| {name:<20} | {preset['problem']:<14} | {preset['steps']:>7} "
            f"| {preset['nt']:>5} | {preset['seeds']:>5} | {lrs}"
        )
    return EXIT_OK


def _format_error(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.6g}"


def _run(args: argparse.Namespace) -> int:
    config = config_from_namespace(args)
    if config.out_path is None:
        raise ConfigError("An output directory is required (--out)", key="out")
    result = harness.run_experiment(config)
    print(
        f"{config.problem}/{config.optimizer}: final mean error "
        f"{_format_error(result.aggregate['final_mean_error'])} over {config.seeds} seed(s)"
    )
    if "raw_final_mean_error" in result.aggregate:
        raw = _format_error(result.aggregate["raw_final_mean_error"])
        print(f"{harness.raw_id(config.optimizer)}: final mean error {raw}")
    if result.diverged_seed_count:
        print(f"{result.diverged_seed_count} seed(s) diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run the command and return the exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        if args.command == "list-presets":
            return _list_presets()
        if args.command == "selftest":
            return EXIT_OK if selftest.run_selftest() else EXIT_ERROR
        return _run(args)
    except ConfigError as e:
        print(f"padam-bench: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PadamBenchError as e:
        logger.debug("Run failed", exc_info=True)
        print(f"padam-bench: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
