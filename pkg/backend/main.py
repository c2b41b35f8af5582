"""
nhtherm - command line entry point
Thermalization of non-Hermitian systems under biorthogonal and right-state GKSL dynamics
"""

import argparse
import json
import logging
import sys
from typing import List, Optional, Tuple

from config import SimulationConfig, get_settings, load_config
from errors import ConfigError, PTBroken, SimulationError, UnstableGenerator
from experiments import cmd_bloch, cmd_evolve, cmd_scan, cmd_sectors
from export import to_jsonable

logger = logging.getLogger("nhtherm")


def parse_range(text: str) -> Tuple[float, float, int]:
    """a:b:n -> (a, b, n)"""
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:n, got {text!r}")
    if steps < 1:
        raise argparse.ArgumentTypeError("grid needs at least one step")
    return start, stop, steps


def parse_temperatures(text: str) -> List[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated temperatures, got {text!r}")
    if not values or any(t <= 0 for t in values):
        raise argparse.ArgumentTypeError("temperatures must be positive")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nhtherm",
        description="Biorthogonal / right-state GKSL dynamics and thermalization diagnostics",
    )
    parser.add_argument("--log-level", default=None, help="Override NHTHERM_LOG_LEVEL")
    parser.add_argument("--env-file", default=None, help="Read NHTHERM_* settings from this .env file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser):
        p.add_argument("--config", default=None, help="JSON run configuration (defaults if omitted)")
        p.add_argument("--output", default=None, help="Output directory (overrides output.directory)")

    evolve = sub.add_parser("evolve", help="Integrate one trajectory to its steady state")
    add_common(evolve)

    scan = sub.add_parser("scan", help="Variance / entropy map over (h_y, h_z)")
    add_common(scan)
    scan.add_argument("--hy", type=parse_range, required=True, metavar="a:b:n")
    scan.add_argument("--hz", type=parse_range, required=True, metavar="a:b:n")
    scan.add_argument("--include-exceptional", action="store_true",
                      help="Also evaluate points inside the guard band around |h_y| = |h_z|")
    scan.add_argument("--workers", type=int, default=None)

    sectors = sub.add_parser("sectors", help="Pauli master-equation sector report")
    add_common(sectors)
    sectors.add_argument("--workers", type=int, default=None)

    bloch = sub.add_parser("bloch", help="Long-time qubit spin vector over temperatures")
    add_common(bloch)
    bloch.add_argument("--temperatures", type=parse_temperatures, default=[0.1, 0.5, 1.0, 2.0, 5.0],
                       metavar="T1,T2,...")
    return parser


def configure_logging(level: str):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _load(args) -> SimulationConfig:
    config = load_config(args.config) if args.config else SimulationConfig()
    if args.output:
        config = config.model_copy(update={"output": config.output.model_copy(update={"directory": args.output})})
    return config


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        settings = get_settings(args.env_file)
    except ConfigError as e:
        print(f"✗ {e}", file=sys.stderr)
        return e.exit_code
    configure_logging(args.log_level or settings.log_level)

    try:
        config = _load(args)
        if args.command == "evolve":
            code, _ = cmd_evolve(config)
        elif args.command == "scan":
            code, _ = cmd_scan(config, args.hy, args.hz, args.include_exceptional, args.workers)
        elif args.command == "sectors":
            code, _ = cmd_sectors(config, args.workers)
        else:
            code, _ = cmd_bloch(config, args.temperatures)
    except ConfigError as e:
        logger.error(f"✗ configuration error: {e}")
        if e.keys:
            logger.error(f"  failing keys: {', '.join(e.keys)}")
        return e.exit_code
    except (PTBroken, UnstableGenerator) as e:
        logger.error(f"✗ {e}")
        logger.error(json.dumps(to_jsonable(e.report), sort_keys=True))
        return e.exit_code
    except SimulationError as e:
        logger.error(f"✗ {type(e).__name__}: {e}")
        return e.exit_code

    return code


if __name__ == "__main__":
    sys.exit(run())
