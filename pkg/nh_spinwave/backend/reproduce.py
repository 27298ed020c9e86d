"""Figure pipelines: each target writes its CSVs, a gnuplot script and one manifest."""

import dataclasses
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from nh_spinwave.backend.config import Config
from nh_spinwave.backend.models import Flavor, GuessEnvelope, ModelParams, QuenchSpec
from nh_spinwave.backend.lattice import make_kgrid
from nh_spinwave.backend.spectra import angle_over_grid, spectrum_over_grid
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
    EdgeFit,
    activation_times,
    axis_edge_2d,
    dominant_ridge,
    fit_velocity,
    radial_edge_2d,
    track_extrema,
    window_field,
)
from nh_spinwave.backend.storage import RunRecorder
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log, bound_contextvars
from nh_spinwave.backend.exception.custom_exception import DomainError

CHAIN = ModelParams(J=1.0, h=5.0, gamma=0.2, dimension=1, n_sites=200)
SQUARE = ModelParams(J=1.0, h=5.0, gamma=0.2, dimension=2, n_sites=100)
FIG1_SETS = ((20.0, 10.0), (2.0, 1.0), (0.5, 1.0), (0.1, 1.0))
SQUARE_SPECTRUM_SETS = ((20.0, 10.0), (2.0, 1.0), (1.0, 1.0))
CHAIN_T_END = 13.0
SQUARE_T_END = 10.0


# ------------------------------------------------------------------
# HELPERS
# ------------------------------------------------------------------
def _gnuplot(*commands: str) -> str:
    header = ['set datafile separator ","', "set key autotitle columnhead"]
    return "\n".join(header + list(commands)) + "\n"


def _quench(flavor: Flavor, post: ModelParams, t_end: float, workers: int, steps: int = Config.STEPS) -> Trajectory:
    spec = QuenchSpec.from_post(post, t_end=t_end, steps=steps)
    grid = make_kgrid(post)
    init = initial_conditions(flavor, spec.pre, grid)
    return integrate(flavor, spec, init, grid, workers=workers)


def _lightcone_fits(field: CorrelationField, prefix: str) -> List[EdgeFit]:
    windowed = window_field(field, Config.CHAIN_FIT_WINDOW)
    edge = dataclasses.replace(
        fit_velocity(activation_times(windowed), threshold=Config.THRESHOLD_FRACTION),
        label=f"{prefix}_edge",
    )
    ridges = track_extrema(windowed)
    fits = [edge] + [dataclasses.replace(r, label=f"{prefix}_{r.label}") for r in ridges]
    if ridges:
        fits.append(dataclasses.replace(dominant_ridge(ridges), label=f"{prefix}_dominant_ridge"))
    return fits


def _write_fits(recorder: RunRecorder, fits: List[EdgeFit], out_dir: Path, stem: str) -> Path:
    summary = recorder.write_table(pd.DataFrame([fit.summary() for fit in fits]), out_dir / f"{stem}_fits.csv")
    recorder.write_table(pd.concat([fit.points_frame() for fit in fits], ignore_index=True), out_dir / f"{stem}_points.csv")
    for fit in fits:
        log.info("Velocity fitted", target=stem, label=fit.label, velocity=fit.velocity, n_points=fit.n_points)
    return summary


def _divergence(*trajectories: Trajectory) -> Optional[dict]:
    reports = {t.flavor.value: t.divergence.as_dict() for t in trajectories if t.divergence is not None}
    return reports or None


# ------------------------------------------------------------------
# SPECTRA
# ------------------------------------------------------------------
def fig1(out_dir: Path, workers: int):
    sets = [ModelParams(J=1.0, h=h, gamma=g, n_sites=256) for h, g in FIG1_SETS]
    recorder = RunRecorder("reproduce", {"target": "fig1", "sets": [p.model_dump() for p in sets]})
    plots = []
    for params in sets:
        boson = spectrum_over_grid(Flavor.BOSONIC, params)
        fermion = spectrum_over_grid(Flavor.FERMIONIC, params, grid=boson.grid)
        name = f"fig1_h{params.h:g}_gamma{params.gamma:g}.csv"
        table = pd.DataFrame(
            {
                "k": boson.grid.points[:, 0],
                "Re_E": boson.energy.real,
                "Im_E": boson.energy.imag,
                "Re_eps": fermion.energy.real,
                "Im_eps": fermion.energy.imag,
            }
        )
        recorder.write_table(table, out_dir / name)
        plots.append(f"plot '{name}' using 1:2 with lines, '' using 1:4 with lines dashtype 2")
        plots.append(f"plot '{name}' using 1:3 with lines, '' using 1:5 with lines dashtype 2")
    script = recorder.write_text(_gnuplot("set multiplot layout 4,2", *plots, "unset multiplot"), out_dir / "fig1.gp")
    return recorder.finish(script)


def spectrum_2d(out_dir: Path, workers: int):
    sets = [ModelParams(J=1.0, h=h, gamma=g, dimension=2, n_sites=64) for h, g in SQUARE_SPECTRUM_SETS]
    recorder = RunRecorder("reproduce", {"target": "spectrum-2d", "sets": [p.model_dump() for p in sets]})
    plots = []
    for params in sets:
        name = f"spectrum2d_h{params.h:g}_gamma{params.gamma:g}.csv"
        recorder.write_table(spectrum_over_grid(Flavor.BOSONIC, params).to_frame(), out_dir / name)
        plots.append(f"splot '{name}' using 1:2:3 with points pt 7 ps 0.3")
        plots.append(f"splot '{name}' using 1:2:4 with points pt 7 ps 0.3")
    script = recorder.write_text(
        _gnuplot("set multiplot layout 3,2", *plots, "unset multiplot"), out_dir / "spectrum-2d.gp"
    )
    return recorder.finish(script)


def angles(out_dir: Path, workers: int):
    params = ModelParams(J=1.0, h=20.0, gamma=10.0, n_sites=256)
    recorder = RunRecorder("reproduce", {"target": "angles", **params.model_dump()})
    recorder.write_table(angle_over_grid(params), out_dir / "angles.csv")
    script = recorder.write_text(
        _gnuplot(
            "set multiplot layout 1,2",
            "plot 'angles.csv' using 1:2 with lines, '' using 1:3 with lines",
            "plot 'angles.csv' using 1:4 with lines, '' using 1:5 with lines",
            "unset multiplot",
        ),
        out_dir / "angles.gp",
    )
    return recorder.finish(script)


# ------------------------------------------------------------------
# CHAIN QUENCHES
# ------------------------------------------------------------------
def _chain_lightcone(out_dir: Path, workers: int, target: str, post: ModelParams):
    recorder = RunRecorder(
        "reproduce",
        {"target": target, **post.model_dump(), "t_end": CHAIN_T_END, "sigma": Config.GUESS_SIGMA},
        {"dt": Config.DT, "steps": Config.STEPS, "cap": Config.DIVERGENCE_CAP},
    )
    traj = _quench(Flavor.BOSONIC, post, CHAIN_T_END, workers)
    distances = np.arange(0, 31)
    field = one_body_correlation(traj, distances)
    guess = guess_correlation(post, GuessEnvelope(), distances, traj.times)

    recorder.write_table(field.to_frame(), out_dir / f"{target}_eom.csv")
    recorder.write_table(guess.to_frame(), out_dir / f"{target}_guess.csv")
    fits = _lightcone_fits(field, "eom") + _lightcone_fits(guess, "guess")
    _write_fits(recorder, fits, out_dir, target)

    script = recorder.write_text(
        _gnuplot(
            "set multiplot layout 2,1",
            f"plot '{target}_eom.csv' using 2:1:3 with image, '{target}_points.csv' using 3:2 with points",
            f"plot '{target}_guess.csv' using 2:1:3 with image",
            "unset multiplot",
        ),
        out_dir / f"{target}.gp",
    )
    return recorder.finish(script, _divergence(traj))


def fig2(out_dir: Path, workers: int):
    return _chain_lightcone(out_dir, workers, "fig2", CHAIN)


def negative_gamma_lightcone(out_dir: Path, workers: int):
    return _chain_lightcone(out_dir, workers, "negative-gamma-lightcone", CHAIN.with_gamma(-0.2))


def momentum(out_dir: Path, workers: int):
    post = CHAIN.model_copy(update={"n_sites": 1000})
    recorder = RunRecorder("reproduce", {"target": "momentum", **post.model_dump(), "t_end": CHAIN_T_END})
    traj = _quench(Flavor.BOSONIC, post, CHAIN_T_END, workers)
    n_samples, n_modes = traj.g.shape
    table = pd.DataFrame(
        {
            "k": np.tile(traj.grid.points[:, 0], n_samples),
            "t": np.repeat(traj.times, n_modes),
            "G": traj.g.real.ravel(),
        }
    )
    recorder.write_table(table, out_dir / "momentum.csv")
    script = recorder.write_text(_gnuplot("plot 'momentum.csv' using 1:2:3 with image"), out_dir / "momentum.gp")
    return recorder.finish(script, _divergence(traj))


def fig5(out_dir: Path, workers: int):
    recorder = RunRecorder("reproduce", {"target": "fig5", **CHAIN.model_dump(), "t_end": CHAIN_T_END})
    boson = _quench(Flavor.BOSONIC, CHAIN, CHAIN_T_END, workers)
    fermion = _quench(Flavor.FERMIONIC, CHAIN, CHAIN_T_END, workers)
    n = min(len(boson.times), len(fermion.times))
    table = pd.DataFrame(
        {
            "t": boson.times[:n],
            "Sz_boson": magnetization(boson)[:n],
            "Sz_fermion": magnetization(fermion)[:n],
        }
    )
    recorder.write_table(table, out_dir / "fig5.csv")
    script = recorder.write_text(
        _gnuplot("plot 'fig5.csv' using 1:2 with lines, '' using 1:3 with lines dashtype 2"), out_dir / "fig5.gp"
    )
    return recorder.finish(script, _divergence(boson, fermion))


def fig6(out_dir: Path, workers: int):
    recorder = RunRecorder("reproduce", {"target": "fig6", **CHAIN.model_dump(), "t_end": CHAIN_T_END})
    distances = np.arange(0, 16)
    trajectories = []
    for flavor in (Flavor.BOSONIC, Flavor.FERMIONIC):
        traj = _quench(flavor, CHAIN, CHAIN_T_END, workers)
        trajectories.append(traj)
        recorder.write_table(zz_correlation(traj, distances).to_frame(), out_dir / f"fig6_{flavor.value}.csv")
    script = recorder.write_text(
        _gnuplot(
            "set multiplot layout 2,1",
            "plot 'fig6_boson.csv' using 2:1:5 with image",
            "plot 'fig6_fermion.csv' using 2:1:5 with image",
            "unset multiplot",
        ),
        out_dir / "fig6.gp",
    )
    return recorder.finish(script, _divergence(*trajectories))


def fig8(out_dir: Path, workers: int):
    gammas = (-0.2, -0.9)
    recorder = RunRecorder("reproduce", {"target": "fig8", **CHAIN.model_dump(), "gammas": list(gammas)})
    plots, summary = [], []
    for gamma in gammas:
        post = CHAIN.with_gamma(gamma)
        boson = _quench(Flavor.BOSONIC, post, CHAIN_T_END, workers)
        fermion = _quench(Flavor.FERMIONIC, post, CHAIN_T_END, workers)
        name = f"fig8_gamma{gamma:g}.csv"
        recorder.write_table(
            pd.DataFrame({"t": boson.times, "Sz_boson": magnetization(boson), "Sz_fermion": magnetization(fermion)}),
            out_dir / name,
        )
        for flavor, traj in ((Flavor.BOSONIC, boson), (Flavor.FERMIONIC, fermion)):
            stationary = solve_stationary(flavor, post, traj.grid)
            summary.append(
                {
                    "gamma": gamma,
                    "flavor": flavor.value,
                    "stationary_Sz": stationary.magnetization,
                    "final_Sz": float(magnetization(traj)[-1]),
                    "max_residual": max(root.residual for root in stationary.roots),
                }
            )
        plots.append(f"plot '{name}' using 1:2 with lines, '' using 1:3 with lines")
    recorder.write_table(pd.DataFrame(summary), out_dir / "fig8_stationary.csv")
    script = recorder.write_text(_gnuplot("set multiplot layout 2,1", *plots, "unset multiplot"), out_dir / "fig8.gp")
    return recorder.finish(script)


def fig9(out_dir: Path, workers: int):
    recorder = RunRecorder("reproduce", {"target": "fig9", **CHAIN.model_dump(), "sigma": Config.GUESS_SIGMA})
    times = np.linspace(0.0, CHAIN_T_END, Config.STEPS)
    distances = np.arange(Config.CHAIN_FIT_WINDOW[0], Config.CHAIN_FIT_WINDOW[1] + 1)
    for use_dispersion, name in ((True, "fig9_dispersion.csv"), (False, "fig9_coefficient.csv")):
        field = guess_correlation(CHAIN, GuessEnvelope(), distances, times, use_dispersion=use_dispersion)
        recorder.write_table(field.to_frame(), out_dir / name)
    script = recorder.write_text(
        _gnuplot(
            "set multiplot layout 1,2",
            "plot 'fig9_dispersion.csv' using 2:1:3 with image",
            "plot 'fig9_coefficient.csv' using 2:1:3 with image",
            "unset multiplot",
        ),
        out_dir / "fig9.gp",
    )
    return recorder.finish(script)


# ------------------------------------------------------------------
# SINGLE MODE
# ------------------------------------------------------------------
def _single_mode(out_dir: Path, target: str, gamma: float, t_end: float):
    params = CHAIN.with_gamma(gamma)
    recorder = RunRecorder(
        "reproduce",
        {"target": target, **params.model_dump(), "n_max": Config.N_MAX, "t_end": t_end},
        {"dt": Config.DT, "steps": Config.STEPS},
    )
    psi0, squeeze = ground_state_hermitian(params.hermitian())
    times = np.linspace(0.0, t_end, Config.STEPS)
    ed = evolve_ed(build_single_mode_hamiltonian(params), psi0, times)
    eom = evolve_eom(params, psi0, times)
    recorder.write_table(ed.to_frame(), out_dir / f"{target}_ed.csv")
    recorder.write_table(eom.to_frame(), out_dir / f"{target}_eom.csv")

    summary = {"r": squeeze.r, "phi": squeeze.phi}
    if gamma > 0:
        summary["t_f"] = divergence_time(squeeze, gamma)
    recorder.write_table(pd.DataFrame([summary]), out_dir / f"{target}_summary.csv")
    script = recorder.write_text(
        _gnuplot(
            "set multiplot layout 3,1",
            f"plot '{target}_eom.csv' using 1:2 with lines, '{target}_ed.csv' using 1:2 with lines dashtype 2",
            f"plot '{target}_eom.csv' using 1:3 with lines, '{target}_ed.csv' using 1:3 with lines dashtype 2",
            f"plot '{target}_eom.csv' using 1:4 with lines, '{target}_ed.csv' using 1:4 with lines dashtype 2",
            "unset multiplot",
        ),
        out_dir / f"{target}.gp",
    )
    divergence = eom.divergence.as_dict() if eom.divergence is not None else None
    return recorder.finish(script, divergence)


def fig3(out_dir: Path, workers: int):
    return _single_mode(out_dir, "fig3", 0.2, 10.0)


def fig7(out_dir: Path, workers: int):
    return _single_mode(out_dir, "fig7", -0.2, 20.0)


def appendix_i(out_dir: Path, workers: int):
    gamma, gamma_prime, t_end = 0.2, 0.05, 20.0
    params = CHAIN.model_copy(update={"gamma": gamma, "gamma_prime": gamma_prime})
    recorder = RunRecorder("reproduce", {"target": "appendix-i", **params.model_dump(), "t_end": t_end})
    psi0, _ = ground_state_hermitian(params.hermitian())
    times = np.linspace(0.0, t_end, 2 * Config.STEPS)
    linear_h = build_single_mode_hamiltonian(params.model_copy(update={"gamma_prime": 0.0}))
    linear = evolve_ed(linear_h, psi0, times)
    quartic = evolve_ed(build_single_mode_hamiltonian(params), psi0, times)
    onset = nonlinearity_onset(linear_h, psi0, gamma, gamma_prime, times)

    recorder.write_table(
        pd.DataFrame({"t": times, "G_linear": linear.g, "G_quartic": quartic.g}), out_dir / "appendix-i.csv"
    )
    recorder.write_table(pd.DataFrame([{"onset": onset if onset is not None else np.nan}]), out_dir / "appendix-i_onset.csv")
    script = recorder.write_text(
        _gnuplot("plot 'appendix-i.csv' using 1:2 with lines, '' using 1:3 with lines"), out_dir / "appendix-i.gp"
    )
    return recorder.finish(script)


# ------------------------------------------------------------------
# SQUARE LATTICE
# ------------------------------------------------------------------
def _square_field(workers: int):
    traj = _quench(Flavor.BOSONIC, SQUARE, SQUARE_T_END, workers)
    # the field is even in x and in y, so one quadrant carries everything
    axis = np.arange(0, 26)
    distances = np.array([(x, y) for x in axis for y in axis])
    return traj, one_body_correlation(traj, distances)


def fig4(out_dir: Path, workers: int):
    recorder = RunRecorder(
        "reproduce",
        {"target": "fig4", **SQUARE.model_dump(), "t_end": SQUARE_T_END},
        {"dt": Config.DT, "steps": Config.STEPS, "cap": Config.DIVERGENCE_CAP},
    )
    traj, field = _square_field(workers)
    snapshots = [int(np.argmin(np.abs(field.times - t))) for t in np.linspace(0.0, SQUARE_T_END, 6)]
    snap = dataclasses.replace(field, times=field.times[snapshots], values=field.values[:, snapshots])
    recorder.write_table(snap.to_frame(), out_dir / "fig4_snapshots.csv")
    window = Config.SQUARE_FIT_WINDOW
    fits = [
        axis_edge_2d(field, axis=0, r_window=window),
        axis_edge_2d(field, axis=1, r_window=window),
        radial_edge_2d(field, r_window=window),
    ]
    _write_fits(recorder, fits, out_dir, "fig4")
    script = recorder.write_text(
        _gnuplot("set view map", "splot 'fig4_snapshots.csv' using 1:2:4 with points pt 5 palette"), out_dir / "fig4.gp"
    )
    return recorder.finish(script, _divergence(traj))


def appendix_h(out_dir: Path, workers: int):
    recorder = RunRecorder("reproduce", {"target": "appendix-h", **SQUARE.model_dump(), "t_end": SQUARE_T_END})
    traj, field = _square_field(workers)
    radius = np.round(np.hypot(field.distances[:, 0], field.distances[:, 1]), 12)
    table = field.to_frame()
    table.insert(0, "radius", np.repeat(radius, len(field.times)))
    profile = table.groupby(["radius", "t"], sort=True, as_index=False)["Re"].mean()
    recorder.write_table(profile, out_dir / "appendix-h.csv")
    _write_fits(recorder, [radial_edge_2d(field, r_window=Config.SQUARE_FIT_WINDOW)], out_dir, "appendix-h")
    script = recorder.write_text(_gnuplot("plot 'appendix-h.csv' using 2:1:3 with image"), out_dir / "appendix-h.gp")
    return recorder.finish(script, _divergence(traj))


TARGETS: Dict[str, Callable] = {
    "fig1": fig1,
    "spectrum-2d": spectrum_2d,
    "angles": angles,
    "fig2": fig2,
    "momentum": momentum,
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
    "fig6": fig6,
    "fig7": fig7,
    "fig8": fig8,
    "fig9": fig9,
    "appendix-h": appendix_h,
    "negative-gamma-lightcone": negative_gamma_lightcone,
    "appendix-i": appendix_i,
}


def reproduce(target: str, out_dir: Optional[Path] = None, workers: int = Config.WORKERS):
    if target not in TARGETS:
        raise DomainError(f"Unknown reproduce target '{target}'; choose from {', '.join(TARGETS)}")
    out_dir = Path(out_dir) if out_dir is not None else Config.OUTPUT_ROOT / target
    with bound_contextvars(target=target):
        log.info("Reproduce started", out_dir=str(out_dir), workers=workers)
        return TARGETS[target](out_dir, workers)
