import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from nh_spinwave.backend.config import Config, load_param_file, merge_params
from nh_spinwave.backend.models import Flavor, GuessEnvelope, ModelParams, QuenchSpec
from nh_spinwave.backend.lattice import make_kgrid
from nh_spinwave.backend.spectra import spectrum_over_grid
from nh_spinwave.backend.dynamics import Trajectory, initial_conditions, integrate
from nh_spinwave.backend.observables import (
    CorrelationField,
    guess_correlation,
    magnetization,
    one_body_correlation,
    zz_correlation,
)
from nh_spinwave.backend.single_mode import (
    build_single_mode_hamiltonian,
    divergence_time,
    evolve_ed,
    evolve_eom,
    ground_state_hermitian,
    nonlinearity_onset,
)
from nh_spinwave.backend.steady_state import solve_stationary
from nh_spinwave.backend.lightcone import (
    axis_edge_2d,
    dominant_ridge,
    profile_edge,
    radial_edge_2d,
    track_extrema,
    window_field,
)
from nh_spinwave.backend.reproduce import TARGETS, reproduce
from nh_spinwave.backend.storage import RunRecorder, manifest_path_for, read_csv, read_manifest
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log, bound_contextvars
from nh_spinwave.backend.exception.custom_exception import SpinWaveException

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 64

SUBCOMMANDS = ("spectrum", "quench", "observe", "single-mode", "steady-state", "lightcone", "reproduce")


# ---------------------------------------------------------
# PARAMETERS
# ---------------------------------------------------------
def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: getattr(args, key, None) for key in ("J", "h", "gamma", "gamma_prime", "dimension", "n_sites")}


def resolve_params(args: argparse.Namespace, base: Optional[Dict[str, Any]] = None) -> ModelParams:
    """Manifest values (if any), then the --config file, then explicit flags."""
    merged = merge_params(base or {}, load_param_file(args.config))
    merged = merge_params(merged, _overrides(args))
    return ModelParams(**merged)


def _out(args: argparse.Namespace, default_name: str) -> Path:
    return Path(args.out) if args.out else Config.OUTPUT_ROOT / default_name


def _emit(**values: Any) -> None:
    for key, value in values.items():
        print(f"{key}={value}")


# ---------------------------------------------------------
# SUBCOMMANDS
# ---------------------------------------------------------
def run_spectrum(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    flavor = Flavor(args.flavor)
    recorder = RunRecorder("spectrum", {**params.model_dump(), "flavor": flavor.value})
    out = recorder.write_table(spectrum_over_grid(flavor, params).to_frame(), _out(args, "spectrum.csv"))
    recorder.finish(out)
    _emit(output=out)
    return EXIT_OK


def run_quench(args: argparse.Namespace) -> int:
    post = resolve_params(args)
    flavor = Flavor(args.flavor)
    spec = QuenchSpec.from_post(post, t_end=args.t_end, steps=args.steps, dt=args.dt)
    recorder = RunRecorder(
        "quench",
        {**post.model_dump(), "flavor": flavor.value, "t_end": spec.t_end},
        {"dt": spec.dt, "steps": spec.steps, "cap": args.cap, "chunk_modes": Config.CHUNK_MODES},
    )

    grid = make_kgrid(post)
    init = initial_conditions(flavor, spec.pre, grid)
    traj = integrate(flavor, spec, init, grid, workers=args.workers, cap=args.cap)

    out = recorder.write_table(traj.to_frame(), _out(args, "quench.csv"))
    divergence = traj.divergence.as_dict() if traj.divergence is not None else None
    recorder.finish(out, divergence)
    _emit(output=out, samples=len(traj.times))
    if divergence is not None:
        _emit(divergence_mode=divergence["mode_index"], divergence_time=divergence["time_estimate"])
    return EXIT_OK


def _distances(params: ModelParams, r_min: int, r_max: int) -> np.ndarray:
    axis = np.arange(r_min, r_max + 1)
    if params.dimension == 1:
        return axis
    mesh = np.meshgrid(*([axis] * params.dimension), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def run_observe(args: argparse.Namespace) -> int:
    source = Path(args.input)
    manifest_file = manifest_path_for(source)
    base: Dict[str, Any] = {}
    flavor_name = args.flavor
    if manifest_file.is_file():
        manifest = read_manifest(manifest_file)
        base = {k: v for k, v in manifest.parameters.items() if k in ModelParams.model_fields}
        flavor_name = flavor_name or manifest.parameters.get("flavor")
    params = resolve_params(args, base)
    flavor = Flavor(flavor_name or Flavor.BOSONIC.value)

    r_max = args.r_max if args.r_max is not None else min(params.n_sites // 2, 20)
    distances = _distances(params, args.r_min, r_max)
    recorder = RunRecorder(
        "observe",
        {**params.model_dump(), "flavor": flavor.value, "kind": args.kind, "r_min": args.r_min, "r_max": r_max},
    )
    recorder.add_input(source)
    if manifest_file.is_file():
        recorder.add_input(manifest_file)

    grid = make_kgrid(params)
    traj = Trajectory.from_frame(read_csv(source), flavor, params, grid)
    if args.kind == "one_body":
        table = one_body_correlation(traj, distances).to_frame()
    elif args.kind == "zz":
        table = zz_correlation(traj, distances).to_frame()
    elif args.kind == "guess":
        envelope = GuessEnvelope(sigma=args.sigma)
        table = guess_correlation(params, envelope, distances, traj.times, args.use_dispersion).to_frame()
    else:
        table = pd.DataFrame({"t": traj.times, "Sz": magnetization(traj)})

    out = recorder.write_table(table, _out(args, f"observe_{args.kind}.csv"))
    recorder.finish(out)
    _emit(output=out)
    return EXIT_OK


def run_single_mode(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    n_max = args.n_max
    recorder = RunRecorder(
        "single-mode",
        {**params.model_dump(), "engine": args.engine, "n_max": n_max, "t_end": args.t_end},
        {"dt": args.dt, "steps": args.steps},
    )
    psi0, squeeze = ground_state_hermitian(params.hermitian(), n_max)
    times = np.linspace(0.0, args.t_end, args.steps)

    if args.engine == "ed":
        series = evolve_ed(build_single_mode_hamiltonian(params, n_max), psi0, times)
    else:
        series = evolve_eom(params, psi0, times, dt=args.dt)

    out = recorder.write_table(series.to_frame(), _out(args, f"single_mode_{args.engine}.csv"))
    divergence = series.divergence.as_dict() if series.divergence is not None else None
    recorder.finish(out, divergence)
    _emit(output=out, r=squeeze.r, phi=squeeze.phi)

    if args.report_tf:
        _emit(t_f=divergence_time(squeeze, params.gamma))
    if args.report_onset:
        linear = build_single_mode_hamiltonian(params.model_copy(update={"gamma_prime": 0.0}), n_max)
        onset = nonlinearity_onset(linear, psi0, params.gamma, params.gamma_prime, times)
        _emit(t_f_prime=onset if onset is not None else "not-reached")
    return EXIT_OK


def run_steady_state(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    flavor = Flavor(args.flavor)
    recorder = RunRecorder("steady-state", {**params.model_dump(), "flavor": flavor.value})
    solution = solve_stationary(flavor, params)
    out = recorder.write_table(solution.to_frame(), _out(args, "steady_state.csv"))
    recorder.finish(out)
    _emit(output=out, magnetization=solution.magnetization)
    return EXIT_OK


def run_lightcone(args: argparse.Namespace) -> int:
    source = Path(args.input)
    recorder = RunRecorder(
        "lightcone",
        {
            "input": str(source),
            "mode": args.mode,
            "threshold": args.threshold,
            "ridge_count": args.ridge_count,
            "window": args.window,
        },
    )
    recorder.add_input(source)
    field = CorrelationField.from_frame(read_csv(source), kind="input")
    window = tuple(args.window) if args.window else None

    if args.mode == "edge":
        fits = [profile_edge(field, args.threshold, window)]
    elif args.mode == "ridges":
        ridges = track_extrema(window_field(field, window), args.ridge_count, args.threshold)
        fits = ridges + ([dominant_ridge(ridges)] if ridges else [])
    elif args.mode == "radial":
        fits = [radial_edge_2d(field, args.threshold, window)]
    else:
        fits = [axis_edge_2d(field, args.axis, args.threshold, window)]

    out = _out(args, "lightcone.csv")
    recorder.write_table(pd.DataFrame([fit.summary() for fit in fits]), out)
    recorder.write_table(
        pd.concat([fit.points_frame() for fit in fits], ignore_index=True),
        out.with_name(out.stem + "_points.csv"),
    )
    recorder.finish(out)
    for fit in fits:
        _emit(**{f"{fit.label}_velocity": fit.velocity})
    return EXIT_OK


def run_reproduce(args: argparse.Namespace) -> int:
    out_dir = Path(args.out) if args.out else None
    manifest = reproduce(args.target, out_dir, workers=args.workers)
    _emit(manifest_id=manifest.manifest_id, outputs=len(manifest.outputs))
    return EXIT_OK


# ---------------------------------------------------------
# PARSER
# ---------------------------------------------------------
def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="KEY=value parameter file")
    common.add_argument("--J", type=float)
    common.add_argument("--h", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--gamma-prime", dest="gamma_prime", type=float)
    common.add_argument("--dim", "--dimension", dest="dimension", type=int)
    common.add_argument("--n-sites", dest="n_sites", type=int)
    common.add_argument("--out")
    common.add_argument("--workers", type=int, default=Config.WORKERS)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="nh-spinwave",
        description="Spin-wave spectra and quench dynamics of the non-Hermitian transverse-field Ising model",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    flavors = [f.value for f in Flavor]

    p = sub.add_parser("spectrum", parents=[common], allow_abbrev=False)
    p.add_argument("--flavor", choices=flavors, default=Flavor.BOSONIC.value)
    p.set_defaults(handler=run_spectrum)

    p = sub.add_parser("quench", parents=[common], allow_abbrev=False)
    p.add_argument("--flavor", choices=flavors, default=Flavor.BOSONIC.value)
    p.add_argument("--t-end", dest="t_end", type=float, required=True)
    p.add_argument("--steps", type=int, default=Config.STEPS)
    p.add_argument("--dt", type=float, default=Config.DT)
    p.add_argument("--cap", type=float, default=Config.DIVERGENCE_CAP)
    p.set_defaults(handler=run_quench)

    p = sub.add_parser("observe", parents=[common], allow_abbrev=False)
    p.add_argument("--input", required=True, help="trajectory CSV written by quench")
    p.add_argument("--kind", choices=["one_body", "zz", "magnetization", "guess"], default="one_body")
    p.add_argument("--flavor", choices=flavors)
    p.add_argument("--r-min", dest="r_min", type=int, default=0)
    p.add_argument("--r-max", dest="r_max", type=int)
    p.add_argument("--sigma", type=float, default=Config.GUESS_SIGMA)
    p.add_argument("--use-dispersion", dest="use_dispersion", action="store_true")
    p.set_defaults(handler=run_observe)

    p = sub.add_parser("single-mode", parents=[common], allow_abbrev=False)
    p.add_argument("--engine", choices=["ed", "eom"], default="ed")
    p.add_argument("--n-max", dest="n_max", type=int, default=Config.N_MAX)
    p.add_argument("--t-end", dest="t_end", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=Config.STEPS)
    p.add_argument("--dt", type=float, default=Config.DT)
    p.add_argument("--report-tf", dest="report_tf", action="store_true")
    p.add_argument("--report-onset", dest="report_onset", action="store_true")
    p.set_defaults(handler=run_single_mode)

    p = sub.add_parser("steady-state", parents=[common], allow_abbrev=False)
    p.add_argument("--flavor", choices=flavors, default=Flavor.BOSONIC.value)
    p.set_defaults(handler=run_steady_state)

    p = sub.add_parser("lightcone", parents=[common], allow_abbrev=False)
    p.add_argument("--input", required=True, help="observable CSV written by observe")
    p.add_argument("--mode", choices=["edge", "ridges", "radial", "axis"], default="edge")
    p.add_argument("--threshold", type=float, default=Config.THRESHOLD_FRACTION)
    p.add_argument("--ridge-count", dest="ridge_count", type=int, default=3)
    p.add_argument("--axis", type=int, choices=[0, 1], default=0)
    p.add_argument(
        "--window", nargs=2, type=int, metavar=("R_MIN", "R_MAX"), help="fit only distances R_MIN..R_MAX (inclusive)"
    )
    p.set_defaults(handler=run_lightcone)

    p = sub.add_parser("reproduce", parents=[common], allow_abbrev=False)
    p.add_argument("target", choices=list(TARGETS))
    p.set_defaults(handler=run_reproduce)

    return parser


def dispatch(argv: Sequence[str]) -> int:
    argv: List[str] = list(argv)
    parser = build_parser()
    if not argv or (argv[0] not in SUBCOMMANDS and argv[0] not in ("-h", "--help")):
        print(parser.format_usage(), end="", file=sys.stderr)
        print(f"unknown subcommand: {argv[0] if argv else '(none)'}", file=sys.stderr)
        return EXIT_USAGE

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        with bound_contextvars(command=args.command):
            return args.handler(args)
    except ValidationError as e:
        log.error("Invalid parameters", command=args.command, error=str(e))
        print(f"invalid parameters: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except SpinWaveException as e:
        log.error("Run failed", command=args.command, error=e.error_message, exit_code=e.exit_code)
        print(f"{type(e).__name__}: {e.error_message}", file=sys.stderr)
        return e.exit_code


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
