"""Command line entry point for the Stokeslet segment experiments."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from .config import EXPERIMENTS, ExperimentConfig, load_config
from .errors import StokesletSegmentsError
from .experiments import run_experiment

logger = logging.getLogger(__name__)

_HELP = {
    "leak": "Sweep eps/h and record the velocity leak of both force solvers",
    "drag": "Sweep eps and fit the slender-body effective radius",
    "swim-planar": "Planar flagellum in free space",
    "swim-wall": "Planar flagellum beating above a no-slip wall",
    "swim-rod": "Kirchhoff rod with random turning curvatures",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML or JSON configuration file")
    parser.add_argument("--eps", type=float, help="Regularization parameter")
    parser.add_argument("--nodes", type=int, help="Number of filament nodes")
    parser.add_argument("--dt", type=float, help="Time step in beat periods")
    parser.add_argument("--t-final", type=float, dest="t_final", help="Simulated time in beat periods")
    parser.add_argument("--seed", type=int, help="Seed of the turning process")
    parser.add_argument("--method", choices=["segments", "mrs"], help="Force solver")
    parser.add_argument("--integrator", choices=["euler", "rk2"], help="Time integrator")
    parser.add_argument("--workers", type=int, help="Threads used to evaluate velocities")
    parser.add_argument(
        "--deterministic",
        action="store_true",
        default=None,
        help="Single-threaded evaluation for bit-identical output",
    )
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stokeslet-segments", description=__doc__)
    subparsers = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        _add_common(subparsers.add_parser(name, help=_HELP[name], description=_HELP[name]))
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """CLI values that were actually given, keyed like the configuration document."""
    keys = ("eps", "nodes", "dt", "t_final", "seed", "method", "integrator", "workers", "deterministic")
    overrides: Dict[str, Any] = {key: getattr(args, key) for key in keys if getattr(args, key) is not None}
    if args.out is not None:
        overrides["out"] = str(args.out)
    return overrides


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(args.config, overrides_from_args(args), experiment=args.experiment)


def main(argv: Optional[Iterable[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(list(argv) if argv is not None else None)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = resolve_config(args)
        logger.info("Running %s, writing to %s", config.experiment, config.out)
        result = run_experiment(config)
    except StokesletSegmentsError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return exc.exit_code

    for path in result.files:
        print(f"Wrote {path}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
