"""Command-line entry point ``lpi``.

Exit status is 0 on success, 2 when the library rejects the input or a run
fails in a known way, and 1 on anything unexpected.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from lpi_marl.exceptions import LPIError
from lpi_marl.harness.commands import (
    OUTPUT_ROOT_ENV,
    apply_overrides,
    cmd_diagnose,
    cmd_plot,
    cmd_solve_exact,
    cmd_sweep,
    cmd_train,
)
from lpi_marl.harness.loader import load_experiment
from lpi_marl.logging import get_logger, log_exception, set_level

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_LPI_ERROR = 2


def _add_common(parser: argparse.ArgumentParser, config_required: bool = True) -> None:
    if config_required:
        parser.add_argument(
            "--config", "-c",
            type=Path,
            required=True,
            help="Experiment YAML file",
        )
    parser.add_argument(
        "--out", "-o",
        type=Path,
        default=None,
        help=f"Output directory (default: config output.directory, then ${OUTPUT_ROOT_ENV}/<name>)",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Level of the lpi_marl logger (default: INFO)",
    )


def _add_run_flags(parser: argparse.ArgumentParser, seeds: bool = True) -> None:
    if seeds:
        parser.add_argument(
            "--seed-override",
            type=int,
            default=None,
            help="Run only this seed instead of the configured list",
        )
        parser.add_argument(
            "--workers",
            type=int,
            default=None,
            help="Worker processes (0 runs inline; default: sweep.workers)",
        )
    parser.add_argument(
        "--cap-override",
        type=int,
        default=None,
        help="Replace the exact enumeration cap",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpi",
        description="Localized policy iteration experiments on networked MDPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Train every sweep point and write metrics")
    _add_common(train)
    _add_run_flags(train)

    sweep = sub.add_parser("sweep", help="Train the grid and draw one chart per (tau, n)")
    _add_common(sweep)
    _add_run_flags(sweep)

    exact = sub.add_parser("solve-exact", help="Optimal value, policy and kappa-gap table")
    _add_common(exact)
    _add_run_flags(exact, seeds=False)

    diagnose = sub.add_parser("diagnose", help="Interaction matrices and decay certificates")
    _add_common(diagnose)
    _add_run_flags(diagnose, seeds=False)

    plot = sub.add_parser("plot", help="Chart metrics or aggregate CSVs as SVG")
    plot.add_argument("csv", nargs="+", type=Path, help="Metrics or aggregate CSV files")
    _add_common(plot, config_required=False)
    return parser


def run(args: argparse.Namespace) -> None:
    """Dispatch a parsed command line."""
    if args.command == "plot":
        out = args.out if args.out is not None else Path("chart.svg")
        if out.suffix != ".svg":
            out = out / "chart.svg"
        cmd_plot(args.csv, out)
        return

    config = load_experiment(args.config)
    if args.command in ("train", "sweep"):
        config = apply_overrides(config, args.seed_override)
        command = cmd_sweep if args.command == "sweep" else cmd_train
        command(config, args.out, args.workers, args.cap_override)
    elif args.command == "solve-exact":
        cmd_solve_exact(config, args.out, args.cap_override)
    elif args.command == "diagnose":
        cmd_diagnose(config, args.out, args.cap_override)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_level(args.log_level)
    try:
        run(args)
    except LPIError as e:
        log_exception(logger, e, f"lpi {args.command} failed")
        return EXIT_LPI_ERROR
    except Exception as e:
        log_exception(logger, e, f"lpi {args.command} crashed")
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
