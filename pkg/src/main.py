#!/usr/bin/env python3
"""
polyvem - conforming virtual elements for (-Δ)^p1 u = f
Main entry point
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

# Add project root directory to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.config import settings
from src.core.commands import create_command_registry, list_all_commands
from src.models.data_models import SOLUTION_NAMES, RunConfig
from src.utils.error_handler import EXIT_CONFIG
from src.utils.logging_config import get_logger, setup_logging

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyvem",
        description="Conforming virtual element solver for polyharmonic problems",
    )
    parser.add_argument("--log-level", default=None, help="override LOG_LEVEL")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    for info in list_all_commands().values():
        for command in info["commands"]:
            p = sub.add_parser(command["name"], help=command["description"])
            p.add_argument("--p1", type=int, required=True, help="operator order")
            p.add_argument("--p2", type=int, required=True, help="regularity index")
            p.add_argument("-r", type=int, required=True, help="accuracy order")
            p.add_argument("--enhanced", action="store_true", help="use the enhanced space")
            p.add_argument(
                "--mesh",
                default="square:2",
                help="file, square:L, perturbed:L or hex:L",
            )
            p.add_argument("--solution", default="sin", help=f"one of {', '.join(SOLUTION_NAMES)}")
            p.add_argument("--out", default=None, help="CSV output path")
            p.add_argument("--levels", default=None, help="level range A..B (convergence)")
            p.add_argument("--seed", type=int, default=settings.default_seed)
            p.add_argument(
                "--format", choices=["markdown", "json"], default=settings.output_format
            )
            p.add_argument(
                "--deterministic",
                action="store_true",
                help="write 0.0 in timing columns",
            )
            p.add_argument(
                "--rate-tolerance",
                type=float,
                default=None,
                help="fail the convergence study if |slope - expected| exceeds this",
            )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        config = RunConfig(
            subcommand=args.subcommand,
            p1=args.p1,
            p2=args.p2,
            r=args.r,
            enhanced=args.enhanced,
            mesh=args.mesh,
            levels=args.levels,
            solution=args.solution,
            out=args.out,
            seed=args.seed,
            format=args.format,
            deterministic=args.deterministic,
            rate_tolerance=args.rate_tolerance,
        )
    except ValidationError as e:
        logger.error("Invalid configuration", error=str(e))
        messages = "; ".join(err["msg"] for err in e.errors())
        print(f"error: {messages}", file=sys.stderr)
        return EXIT_CONFIG

    registry = create_command_registry()
    return registry[config.subcommand](config)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
