"""
Command-line entry point: ``python -m app <command>``.

Exit status is 0 when every proposed-method run holds its actuator
constraints (or the bound suite passes), 1 when one does not, 2 for a bad
scenario or arguments and 3 when a run aborts.
"""
import os
import sys
import json
import argparse
import logging
from typing import List, Optional

from pydantic import ValidationError

from app.config import configure_logging
from app.errors import DriveBoundError, InstabilityError, ReportingError, SimulationError
from app.models import ActuatorFamily, Method, RunMetrics, ScenarioConfig
from app.services.reporting_service import ReportingService, input_bounds, read_csv, render_plots
from app.services.simulation_service import SimulationService
from app.services.verification_service import verify_saturation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_ABORTED = 3

PROPOSED = {Method.PROPOSED_ASYM, Method.PROPOSED_MAGRATE}


def load_scenario(path: Optional[str], args: argparse.Namespace) -> ScenarioConfig:
    """
    Read a scenario document, or build one from the preset, then apply CLI overrides.
    """
    if path:
        with open(path) as f:
            data = json.load(f)
    else:
        data = {
            "method": args.method or Method.PROPOSED_ASYM.value,
            "trajectory": {"preset": args.trajectory or "ellipse"},
            "initial_case": args.case or "P1",
        }
        data["name"] = f"{data['trajectory']['preset']}-{data['initial_case']}-{data['method']}"
    if path and args.method:
        data["method"] = args.method
    integrator = dict(data.get("integrator") or {})
    if args.dt is not None:
        integrator["dt"] = args.dt
    if args.duration is not None:
        integrator["duration"] = args.duration
    if integrator:
        data["integrator"] = integrator
    return ScenarioConfig.parse_obj(data)


def parse_methods(text: str, cfg: ScenarioConfig) -> List[Method]:
    """
    Comma-separated method list; ``proposed`` picks the scenario family's proposed method.
    """
    methods = []
    for token in (t.strip() for t in text.split(",") if t.strip()):
        if token == "proposed":
            family = cfg.actuator_model
            methods.append(Method.PROPOSED_MAGRATE if family == ActuatorFamily.MAGRATE else Method.PROPOSED_ASYM)
        else:
            methods.append(Method(token))
    return methods


def parse_values(text: str) -> list:
    """
    Sweep values as a JSON list body: ``1,2,3`` or ``[1,2],[3,4]``.
    """
    return json.loads(f"[{text}]")


def _holds_constraints(cfg: ScenarioConfig, metrics: RunMetrics) -> bool:
    # Any limited drive step breaks the bounded-drive assumption of the model
    if cfg.method not in PROPOSED:
        return True
    if metrics.drive_limit_events:
        logger.warning(f"{cfg.name}: drive limited on {metrics.drive_limit_events} steps")
    return metrics.constraint_violation_count == 0 and metrics.drive_limit_events == 0


def _publish(reporting: ReportingService, records, cfg: ScenarioConfig, out_dir: str) -> RunMetrics:
    metrics = reporting.publish(records, cfg, out_dir)
    print(json.dumps({"name": cfg.name, **metrics.dict()}))
    return metrics


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_scenario(args.scenario, args)
    records = SimulationService().run_scenario(cfg)
    metrics = _publish(ReportingService(), records, cfg, args.out)
    return EXIT_OK if _holds_constraints(cfg, metrics) else EXIT_VIOLATION


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = load_scenario(args.scenario, args)
    methods = parse_methods(args.methods, cfg)
    results = SimulationService().compare(cfg, methods)
    reporting = ReportingService()
    status = EXIT_OK
    for method, records in results.items():
        run_cfg = SimulationService.with_method(cfg, method)
        metrics = _publish(reporting, records, run_cfg, os.path.join(args.out, method.value))
        if not _holds_constraints(run_cfg, metrics):
            status = EXIT_VIOLATION
    return status


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_scenario(args.scenario, args)
    values = parse_values(args.values)
    service = SimulationService()
    reporting = ReportingService()
    status = EXIT_OK
    for value, records in zip(values, service.sweep(cfg, args.param, values)):
        run_cfg = service.with_param(cfg, args.param, value)
        out_dir = os.path.join(args.out, f"{args.param}={json.dumps(value).replace(' ', '')}")
        metrics = _publish(reporting, records, run_cfg, out_dir)
        if not _holds_constraints(run_cfg, metrics):
            status = EXIT_VIOLATION
    return status


def cmd_verify_saturation(args: argparse.Namespace) -> int:
    report = verify_saturation(
        ActuatorFamily(args.model),
        signals=args.signals,
        duration=args.duration,
        dt=args.dt,
        seed=args.seed,
    )
    print(report.json(indent=2))
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_plot(args: argparse.Namespace) -> int:
    records = read_csv(args.csv)
    bounds = input_bounds(load_scenario(args.scenario, args)) if args.scenario else None
    for path in render_plots(records, args.out, bounds, title=os.path.basename(args.csv)):
        print(path)
    return EXIT_OK


def _scenario_options(parser: argparse.ArgumentParser, out_required: bool = True) -> None:
    parser.add_argument("--scenario", help="scenario JSON document (defaults to the cybership2 preset)")
    parser.add_argument("--method", choices=[m.value for m in Method], help="override the scenario method")
    parser.add_argument("--trajectory", choices=["ellipse", "figure8"], help="preset trajectory when no scenario file")
    parser.add_argument("--case", choices=["P1", "P2", "P3"], help="preset initial condition when no scenario file")
    parser.add_argument("--dt", type=float, help="integrator step [s]")
    parser.add_argument("--duration", type=float, help="simulated horizon [s]")
    parser.add_argument("--out", required=out_required, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="usv-trackctl", description="Vessel tracking control under actuator saturation")
    parser.add_argument("--log-level", default=None, help="overrides LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario")
    _scenario_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run one scenario under several methods")
    _scenario_options(p)
    p.add_argument("--methods", default="proposed,adhoc,unbounded", help="comma-separated methods")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="re-run a scenario over values of one parameter")
    _scenario_options(p)
    p.add_argument("--param", required=True, help="dotted path into the scenario, e.g. gains.K1")
    p.add_argument("--values", required=True, help="comma-separated JSON values, e.g. '[1,1,1],[2,2,2]'")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-saturation", help="random-signal bound suite for a saturation model")
    p.add_argument("--model", choices=["asym", "magrate"], required=True)
    p.add_argument("--signals", type=int, default=None, help="10000 for asym, the 6 worst-case drives for magrate by default")
    p.add_argument("--duration", type=float, default=None, help="[s], 100 by default")
    p.add_argument("--dt", type=float, default=None, help="[s], 0.01 by default")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_saturation)

    p = sub.add_parser("plot", help="re-render figures from a trace CSV")
    p.add_argument("--csv", required=True, help="trace written by simulate")
    _scenario_options(p)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except (ValidationError, KeyError, ValueError, json.JSONDecodeError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"Cannot read input: {e}")
        return EXIT_USAGE
    except (InstabilityError, DriveBoundError) as e:
        logger.error(f"Run aborted: {e}")
        return EXIT_ABORTED
    except (ReportingError, SimulationError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
