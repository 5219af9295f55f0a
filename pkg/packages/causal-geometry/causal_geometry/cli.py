"""The ``geom`` command line.

Usage:
    geom list                                    # Catalog of geometries
    geom invariants --geometry kapadia --points 20
    geom raychaudhuri --config runs/frw.toml --format csv --out frw.csv
    geom weyl --geometry wuenschmann_cone --seed 7 --workers 4

Exit statuses: 0 pass, 1 invariant failure, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .catalog import GeometryRegistry, list_geometries
from .config import FORMATS, OPERATIONS, RunConfig, apply_overrides, load_config
from .errors import CausalGeometryError, ValidationError
from .logger import logger
from .report import STATUS_CONFIG_ERROR, STATUS_PASS, STATUS_RUNTIME_ERROR
from .runner import run


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geom",
        description="Numerical checks for regular causal geometries",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument(
        "--verbose", action="store_true", help="Log debug output to stderr"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("list", parents=[common], help="List the geometry catalog")

    for operation in OPERATIONS:
        command = commands.add_parser(
            operation, parents=[common], help=f"Run the {operation} operation"
        )
        command.add_argument("--geometry", help="Catalog geometry name (overrides the config)")
        command.add_argument("--seed", type=_seed, help="Sampler seed")
        command.add_argument("--points", type=int, help="Number of sampled points")
        command.add_argument("--tol", type=float, help="Integrator tolerance")
        command.add_argument("--out", help="Report path (default: stdout)")
        command.add_argument("--format", choices=FORMATS, help="Report format")
        command.add_argument("--workers", type=int, help="Worker processes")
    return parser


def _list(config: Optional[RunConfig]) -> int:
    registry = GeometryRegistry()
    if config is not None and not config.geometry.is_builtin:
        config.geometry.build(registry)
    for entry in list_geometries(registry):
        print(entry.describe())
    return STATUS_PASS


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        config = load_config(args.config) if args.config else None
        if args.command == "list":
            return _list(config)
        config = apply_overrides(
            config or RunConfig(operation=args.command),
            operation=args.command,
            geometry=args.geometry,
            seed=args.seed,
            points=args.points,
            tol=args.tol,
            out=args.out,
            format=args.format,
            workers=args.workers,
        )
    except ValidationError as error:
        print(f"error: {error}", file=sys.stderr)
        return STATUS_CONFIG_ERROR
    except CausalGeometryError as error:
        action = "list geometries" if args.command == "list" else f"prepare {args.command}"
        logger.error(f"Cannot {action}: {error}")
        print(f"error: {error}", file=sys.stderr)
        return STATUS_RUNTIME_ERROR

    try:
        report = run(config)
    except ValidationError as error:
        print(f"error: {error}", file=sys.stderr)
        return STATUS_CONFIG_ERROR
    except CausalGeometryError as error:
        logger.error(f"{config.operation} on {config.geometry.label} failed: {error}")
        print(f"error: {error}", file=sys.stderr)
        return STATUS_RUNTIME_ERROR

    report.write(config.output.path, config.output.format)
    for summary in report.summaries:
        if not summary.passed:
            print(
                f"FAIL {summary.name}: max {summary.maximum:.3e} "
                f"> tolerance {summary.tolerance:.1e}",
                file=sys.stderr,
            )
    for error in report.errors:
        print(f"error at point {error['index']}: {error['message']}", file=sys.stderr)
    return report.status


if __name__ == "__main__":
    sys.exit(main())
