"""
Command-line entry point for the scenario-tree lab.

Exit codes: 0 success, 1 invariant or convergence failure, 2 configuration error.
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence

from pydantic import ValidationError

from src.config import settings
from src.models.scenario import SUITES, GridSpec, RunReport, Scenario
from src.repository.scenario_repository import ScenarioRepository
from src.services.lab_service import LabService, load_scenario
from src.utils.exceptions import (
    BDSVIELabException,
    ConfigurationError,
    ConvergenceError,
    MeasurabilityError,
    NonContractionError,
    NonConvergenceError,
    StepSizeError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _steps(value: str) -> List[int]:
    try:
        steps = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{value}'")
    if not steps:
        raise argparse.ArgumentTypeError("expected at least one N")
    return steps


def _parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    common.add_argument("--stable-output", action="store_true", help="Omit timings for byte-identical reports")
    common.add_argument("--guard-override", type=int, default=None, help="Raise the memory guard on N")
    common.add_argument("--log-level", default=settings.log_level, help="Logging level (default: %(default)s)")

    parser = argparse.ArgumentParser(prog=settings.app_name, description="Exact BDSDE/BDSVIE lab on a scenario tree")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", parents=[common], help="Solve a scenario and write summaries")
    solve.add_argument("--scenario", required=True)
    solve.add_argument("--out", required=True)

    check = commands.add_parser("check", parents=[common], help="Run invariant suites")
    check.add_argument("--scenario", required=True)
    check.add_argument("--suite", action="append", choices=SUITES, default=None, help="Repeatable")
    check.add_argument("--out", default=None)

    convergence = commands.add_parser("convergence", parents=[common], help="Refinement study over N")
    convergence.add_argument("--scenario", required=True)
    convergence.add_argument("--steps", type=_steps, default=[4, 6, 8, 10], help="Comma-separated N values")
    convergence.add_argument("--out", default=None)

    repdemo = commands.add_parser("repdemo", parents=[common], help="Backward representation demonstrations")
    repdemo.add_argument("--T", dest="horizon", type=float, default=1.0)
    repdemo.add_argument("--N", dest="steps", type=int, default=6)
    repdemo.add_argument("--out", required=True)

    return parser.parse_args(argv)


def _scenario(args: argparse.Namespace) -> Scenario:
    if args.command == "repdemo":
        scenario = Scenario(grid=GridSpec(T=args.horizon, N=args.steps))
    else:
        scenario = load_scenario(args.scenario, args.guard_override)
    if args.seed is not None:
        scenario = scenario.model_copy(update={"seed": args.seed})
    return scenario


def _emit(report: RunReport, written: bool) -> None:
    if not written:
        print(report.model_dump_json(by_alias=True, exclude_none=True, indent=2))
    failed = [c.name for c in report.checks if not (c.passed or c.skipped)]
    if failed:
        logger.error(f"Failed suites: {', '.join(failed)}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    args = _parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )

    try:
        scenario = _scenario(args)
        service = LabService(
            repository=ScenarioRepository(args.out),
            guard=args.guard_override,
            stable_output=args.stable_output,
        )
        report = service.run(
            scenario,
            args.command,
            suites=getattr(args, "suite", None),
            steps=getattr(args, "steps", None) if args.command == "convergence" else None,
        )
    except (ConfigurationError, StepSizeError, MeasurabilityError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except ValidationError as e:
        logger.error(f"Invalid scenario: {e}")
        return EXIT_CONFIG
    except (NonConvergenceError, NonContractionError) as e:
        logger.error(f"{e}; contraction ratios: {[round(r, 6) for r in e.ratios]}")
        return EXIT_FAILURE
    except ConvergenceError as e:
        logger.error(str(e))
        return EXIT_FAILURE
    except BDSVIELabException as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE

    _emit(report, written=args.out is not None)
    return EXIT_OK if report.passed else EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
