"""Command line entry point: `vscpt run|fit|oracle-check|presets|serve`."""
import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .core.config import settings
from .core.exceptions import SimulationError
from .services.analysis import RECOIL_CENTERS, fit_gaussian_peaks
from .services.hamiltonian import SimParams
from .services.oracle import run_oracle_check
from .services.outputs import background_record, fit_records, read_distribution, write_json
from .services.scenarios import DEFAULT_OMEGA_R, DEFAULT_RABI, PresetName, merge_config, parse_config, preset, run_scenario

logger = logging.getLogger("vscpt")

ORACLE_TOLERANCE = 1e-6
COHERENCE_TOLERANCE = 1e-10


def _centers(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(c) for c in text.split(",") if c.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vscpt", description="VSCPT simulator for the J_g=2 <-> J_e=1 transition.")
    parser.add_argument("--log-level", default=settings.log_level, help="logging level (default from settings.yaml)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a scenario document")
    source = run.add_mutually_exclusive_group()
    source.add_argument("--preset", choices=[p.value for p in PresetName], help="built-in scenario")
    source.add_argument("--config", type=Path, help="JSON/YAML scenario document")
    run.add_argument("--out", type=Path, default=Path(settings.output_dir), help="output directory")
    run.add_argument("--detector-sigma", type=float, help="Gaussian detector resolution in hbar*k")
    run.add_argument("--dt", type=float, help="time step in 1/Gamma")
    run.add_argument("--grid-points", type=int, help="grid points per hbar*k")

    fit = sub.add_parser("fit", help="fit Gaussians to a distribution CSV")
    fit.add_argument("path", type=Path)
    fit.add_argument("--centers", type=_centers, default=RECOIL_CENTERS, help="initial centers, e.g. -2,-1,0,1,2")
    fit.add_argument("--background", action="store_true", help="also fit a broad pedestal under the peaks")
    fit.add_argument("--out", type=Path, help="write the fit records to this JSON file")

    oracle = sub.add_parser("oracle-check", help="compare the integrator with the superoperator exponential")
    oracle.add_argument("--p-max", type=float, default=4.0)
    oracle.add_argument("--points", type=int, default=4, help="grid points per hbar*k")
    oracle.add_argument("--gamma-t", type=float, default=5.0)
    oracle.add_argument("--omega-plus", type=float, default=DEFAULT_RABI)
    oracle.add_argument("--omega-minus", type=float, default=DEFAULT_RABI)
    oracle.add_argument("--budget-mb", type=float, help="memory budget for the oracle (default from settings.yaml)")

    sub.add_parser("presets", help="list the built-in scenarios")

    serve = sub.add_parser("serve", help="start the HTTP run service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2))


def _fail(error: Exception) -> int:
    line = {
        "error": type(error).__name__,
        "message": str(error),
        "stage": getattr(error, "stage_index", None),
        "gamma_t": getattr(error, "gamma_t", None),
    }
    print(json.dumps(line), file=sys.stderr)
    return 1


def cmd_run(args: argparse.Namespace) -> int:
    if args.config is not None:
        config = parse_config(args.config.read_text(encoding="utf-8"))
    else:
        config = preset(args.preset or PresetName.SHORT.value)

    overrides = {}
    if args.detector_sigma is not None:
        overrides["detector_sigma"] = args.detector_sigma
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.grid_points is not None:
        overrides["grid"] = {"points_per_recoil": args.grid_points}
    if overrides:
        config = merge_config(overrides, config)

    report = run_scenario(config, args.out)
    _emit(report.model_dump(mode="json"))
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    dist = read_distribution(args.path)
    fit = fit_gaussian_peaks(dist, args.centers, background=args.background)
    payload = {
        "converged": fit.converged,
        "iterations": fit.iterations,
        "peaks": fit_records(fit),
        "background": background_record(fit),
    }
    if args.out is not None:
        write_json(payload, args.out)
    _emit(payload)
    return 0


def cmd_oracle_check(args: argparse.Namespace) -> int:
    params = SimParams(args.omega_plus, args.omega_minus, 0.0, DEFAULT_OMEGA_R)
    check = run_oracle_check(
        params, p_max=args.p_max, points_per_recoil=args.points, gamma_t=args.gamma_t,
        memory_budget_mb=args.budget_mb,
    )
    passed = check.max_deviation < ORACLE_TOLERANCE and check.cross_family_coherence < COHERENCE_TOLERANCE
    _emit({**dataclasses.asdict(check), "passed": passed})
    if not passed:
        return _fail(SimulationError(
            f"oracle deviation {check.max_deviation:.3e}, cross-family coherence {check.cross_family_coherence:.3e}"
        ))
    return 0


def cmd_presets(args: argparse.Namespace) -> int:
    _emit({p.value: preset(p.value).model_dump(mode="json") for p in PresetName})
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port)
    return 0


COMMANDS = {
    "run": cmd_run,
    "fit": cmd_fit,
    "oracle-check": cmd_oracle_check,
    "presets": cmd_presets,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (SimulationError, ValueError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        return _fail(e)


if __name__ == "__main__":
    sys.exit(main())
