"""Command-line entry point: `python -m cli.main <command> [flags]`.

Exit codes: 0 success, 1 configuration or fit error, 2 solver failure or every row failed.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from pydantic import ValidationError

from cli.commands.blowup import cmd_blowup
from cli.commands.capacitance import cmd_capacitance
from cli.commands.fit import cmd_fit
from cli.commands.mesh import cmd_mesh
from cli.commands.oracle import cmd_oracle
from cli.commands.resonance import cmd_resonance
from cli.schemas.record import SweepRecord
from cli.utils.config_file import load_config_file, merge_config
from cli.utils.sweep import all_failed
from physics.config import settings
from physics.errors import ConfigError, FitError, LabError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2

COMMANDS = {
    "mesh": cmd_mesh,
    "capacitance": cmd_capacitance,
    "resonance": cmd_resonance,
    "fit": cmd_fit,
    "blowup": cmd_blowup,
    "oracle": cmd_oracle,
}

# Flags that are not experiment settings
_CONTROL_KEYS = {"command", "config", "schema", "log_level"}


def _experiment_flags(parser: argparse.ArgumentParser) -> None:
    shape = parser.add_argument_group("shape")
    shape.add_argument("--family", choices=["sphere", "superellipsoid", "ellipsoid"])
    shape.add_argument("--m", type=int, help="convexity order of the superellipsoid family")
    shape.add_argument("--a1", type=float, help="size of the upper body")
    shape.add_argument("--a2", type=float, help="size of the lower body")
    shape.add_argument("--axes", type=float, nargs=3, metavar=("A1", "A2", "A3"), help="ellipsoid semiaxes")

    gap = parser.add_argument_group("gap")
    gap.add_argument("--eps", type=float, help="single gap distance")
    gap.add_argument("--eps-sweep", type=float, nargs=3, metavar=("START", "STOP", "COUNT"), help="log-spaced eps")
    gap.add_argument("--delta-sweep", type=float, nargs=3, metavar=("START", "STOP", "COUNT"), help="coupled sweep")
    gap.add_argument("--beta", type=float, help="coupling exponent: omega_2 ~ delta^(beta/2)")

    materials = parser.add_argument_group("materials")
    materials.add_argument("--delta", type=float, help="density contrast rho_b / rho")
    materials.add_argument("--vb", type=float, help="wave speed inside the resonators")
    materials.add_argument("--rho", type=float)
    materials.add_argument("--rho-b", type=float)
    materials.add_argument("--kappa", type=float)
    materials.add_argument("--kappa-b", type=float)

    numerics = parser.add_argument_group("numerics and output")
    numerics.add_argument("--level", type=int, help=f"mesh level (default {settings.MESH_LEVEL})")
    numerics.add_argument("--grading", type=float, help=f"grading ratio toward the poles (default {settings.GRADING})")
    numerics.add_argument("--depth", type=int, help=f"grading depth (default {settings.GRADING_DEPTH})")
    numerics.add_argument("--tol", type=float, help=f"oracle tolerance (default {settings.ORACLE_TOL})")
    numerics.add_argument("--oracle", action="store_true", default=None, help="add image-charge deviations")
    numerics.add_argument("--workers", type=int, help="parallel sweep points")
    numerics.add_argument("--out", type=Path, help="output path; CSV plus a .json mirror")
    numerics.add_argument("--records", type=Path, help="records file for the fit command")
    numerics.add_argument("--config", type=Path, help="flat key = value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaplab", description="Capacitance and resonance of close-to-touching resonators")
    parser.add_argument("--schema", action="store_true", help="print the sweep record columns and exit")
    parser.add_argument("--log-level", default=None, help=f"logging level (default {settings.LOG_LEVEL})")
    subparsers = parser.add_subparsers(dest="command")
    for name, handler in COMMANDS.items():
        sub = subparsers.add_parser(name, help=(handler.__doc__ or name).strip().splitlines()[0])
        _experiment_flags(sub)
    return parser


def schema_dump() -> str:
    """Column name, type and description of every SweepRecord column."""
    properties = SweepRecord.model_json_schema()["properties"]
    columns = [
        {
            "column": name,
            "type": field.get("type") or [t.get("type") for t in field.get("anyOf", [])],
            "description": field.get("description", ""),
        }
        for name, field in properties.items()
    ]
    return json.dumps(columns, indent=2) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)-5s [%(name)s] %(message)s",
    )

    if args.schema:
        sys.stdout.write(schema_dump())
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG

    flags = {key: value for key, value in vars(args).items() if key not in _CONTROL_KEYS}
    for key in ("eps_sweep", "delta_sweep", "axes"):
        if flags.get(key) is not None:
            flags[key] = tuple(flags[key])

    started = time.monotonic()
    try:
        file_values = load_config_file(args.config) if args.config else {}
        config = merge_config(file_values, flags)
        result = COMMANDS[args.command](config)
    except (ConfigError, ValidationError, FitError) as err:
        logger.error("%s", err)
        return EXIT_CONFIG
    except LabError:
        logger.exception("%s failed", args.command)
        return EXIT_SOLVER

    logger.info("%s finished in %.0fms", args.command, (time.monotonic() - started) * 1000)
    if isinstance(result, list) and all_failed(result):
        logger.error("every sweep row failed")
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
