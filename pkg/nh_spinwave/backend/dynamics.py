import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from nh_spinwave.backend.config import Config
from nh_spinwave.backend.models import Flavor, ModelParams, QuenchSpec
from nh_spinwave.backend.lattice import CoeffPair, KGrid, coeffs_over_grid
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log, bound_contextvars
from nh_spinwave.backend.exception.custom_exception import DomainError, NumericalFailure

Correlator = Union[complex, np.ndarray]


@dataclass
class ModeState:
    """Anomalous correlator ``f`` and occupation ``g``, one value or one per mode."""

    f: Correlator
    g: Correlator


@dataclass(frozen=True)
class DivergenceReport:
    mode_index: int
    bracket: Tuple[float, float]
    time_estimate: float
    last_sample_time: float
    cap: float

    def as_dict(self) -> dict:
        return {
            "mode_index": self.mode_index,
            "bracket": list(self.bracket),
            "time_estimate": self.time_estimate,
            "last_sample_time": self.last_sample_time,
            "cap": self.cap,
        }


@dataclass(frozen=True)
class Trajectory:
    """Sampled correlators of every grid mode; ``f`` and ``g`` are (samples, modes)."""

    flavor: Flavor
    params: ModelParams
    grid: KGrid
    times: np.ndarray
    f: np.ndarray
    g: np.ndarray
    divergence: Optional[DivergenceReport] = None

    @property
    def states(self) -> List[ModeState]:
        return [ModeState(f=f, g=g) for f, g in zip(self.f, self.g)]

    def to_frame(self) -> pd.DataFrame:
        n_samples, n_modes = self.g.shape
        return pd.DataFrame(
            {
                "t": np.repeat(self.times, n_modes),
                "k_index": np.tile(np.arange(n_modes), n_samples),
                "Re_F": self.f.real.ravel(),
                "Im_F": self.f.imag.ravel(),
                "Re_G": self.g.real.ravel(),
                "Im_G": self.g.imag.ravel(),
            }
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, flavor: Flavor, params: ModelParams, grid: KGrid) -> "Trajectory":
        missing = {"t", "k_index", "Re_F", "Im_F", "Re_G", "Im_G"} - set(frame.columns)
        if missing:
            raise DomainError(f"Trajectory table lacks columns {sorted(missing)}")
        frame = frame.sort_values(["t", "k_index"], kind="stable")
        times = np.unique(frame["t"].to_numpy())
        n_modes = len(grid)
        if len(frame) != len(times) * n_modes:
            raise DomainError(
                f"Trajectory table has {len(frame)} rows, expected {len(times)} samples x {n_modes} modes"
            )
        shape = (len(times), n_modes)
        f = (frame["Re_F"].to_numpy() + 1j * frame["Im_F"].to_numpy()).reshape(shape)
        g = (frame["Re_G"].to_numpy() + 1j * frame["Im_G"].to_numpy()).reshape(shape)
        return cls(flavor=flavor, params=params, grid=grid, times=times, f=f, g=g)


# ------------------------------------------------------------------
# INITIAL CONDITIONS
# ------------------------------------------------------------------
def initial_conditions(flavor: Flavor, pre: ModelParams, grid: KGrid) -> ModeState:
    """Ground-state correlators of the Hermitian pre-quench model on every grid mode."""
    if pre.gamma != 0.0:
        raise DomainError("Initial conditions require a Hermitian pre-quench model (gamma = 0)")

    coeffs = coeffs_over_grid(flavor, pre, grid)
    a = np.asarray(coeffs.a).real

    if flavor is Flavor.BOSONIC:
        ratio = -np.asarray(coeffs.b).real / a
        unstable = ~(np.abs(ratio) < 1.0)
        if unstable.any():
            bad = int(np.flatnonzero(unstable)[0])
            log.error("Pre-quench vacuum unstable", k=grid.points[bad].tolist(), ratio=float(ratio[bad]))
            raise DomainError(
                f"|B/A| >= 1 at k={grid.points[bad].tolist()}: the pre-quench bosonic vacuum does not exist"
            )
        alpha = 0.5 * np.arctanh(ratio)
        g = np.sinh(alpha) ** 2
        f = np.cosh(alpha) * np.sinh(alpha)
        return ModeState(f=f + 0j, g=g + 0j)

    if np.any(a == 0.0):
        bad = int(np.flatnonzero(a == 0.0)[0])
        raise DomainError(f"Fermionic angle undefined at k={grid.points[bad].tolist()} (A = 0)")
    theta = np.arctan(0.25 * pre.J * np.sin(grid.points[:, 0]) / a)
    half = 0.5 * theta
    g = np.sin(half) ** 2
    f = -1j * (np.sin(half) * np.cos(half))
    return ModeState(f=f, g=g + 0j)


# ------------------------------------------------------------------
# EQUATIONS OF MOTION
# ------------------------------------------------------------------
def _bosonic_rhs(a, b, eta, f, g):
    abs_f2 = f.real * f.real + f.imag * f.imag
    df = 4.0 * eta * f * g - 2j * a * f - 1j * b * (1.0 + 2.0 * g)
    dg = -2.0 * b * f.imag + 2.0 * eta * (abs_f2 + g + g * g)
    return df, dg


def _fermionic_rhs(a, b, eta, f, g):
    abs_f2 = f.real * f.real + f.imag * f.imag
    df = -8.0 * eta * f * g - 4j * a * f + 2j * b * (1.0 - 2.0 * g)
    dg = 4.0 * eta * (abs_f2 + g - g * g) + 4j * b * f.real
    return df, dg


_RHS: dict[Flavor, Callable] = {Flavor.BOSONIC: _bosonic_rhs, Flavor.FERMIONIC: _fermionic_rhs}


def eom_rhs(flavor: Flavor, coeffs: CoeffPair, s: ModeState) -> ModeState:
    a = np.asarray(coeffs.a, dtype=complex)
    f = np.asarray(s.f, dtype=complex)
    g = np.asarray(s.g, dtype=complex)
    df, dg = _RHS[flavor](a, np.asarray(coeffs.b, dtype=complex), a.imag, f, g)
    if df.ndim == 0:
        return ModeState(f=complex(df), g=complex(dg))
    return ModeState(f=df, g=dg)


def purity_defect(flavor: Flavor, state: ModeState) -> Correlator:
    """|F|^2 - G(1 + G) for bosons, |F|^2 - G(1 - G) for fermions; zero for pure Gaussian states."""
    f = np.asarray(state.f, dtype=complex)
    g = np.asarray(state.g, dtype=complex)
    sign = 1.0 if flavor is Flavor.BOSONIC else -1.0
    return (f.real * f.real + f.imag * f.imag) - g * (1.0 + sign * g)


# ------------------------------------------------------------------
# FIXED-STEP RK4 CORE
# ------------------------------------------------------------------
def _rk4_step(rhs, a, b, eta, f, g, h):
    k1f, k1g = rhs(a, b, eta, f, g)
    k2f, k2g = rhs(a, b, eta, f + 0.5 * h * k1f, g + 0.5 * h * k1g)
    k3f, k3g = rhs(a, b, eta, f + 0.5 * h * k2f, g + 0.5 * h * k2g)
    k4f, k4g = rhs(a, b, eta, f + h * k3f, g + h * k3g)
    f_next = f + (h / 6.0) * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
    g_next = g + (h / 6.0) * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
    return f_next, g_next


def _substeps(interval: float, dt: float) -> int:
    return max(1, math.ceil(interval / dt - 1e-9))


def propagate_modes(
    flavor: Flavor,
    a: Correlator,
    b: Correlator,
    f0: Correlator,
    g0: Correlator,
    times: np.ndarray,
    dt: float = Config.DT,
    cap: float = Config.DIVERGENCE_CAP,
) -> Tuple[np.ndarray, np.ndarray, Optional[DivergenceReport]]:
    """Advance independent modes with classic RK4, landing exactly on every sample time.

    Each sample interval is split into ceil(interval / dt) equal steps. A step
    that pushes any |G| above ``cap`` is rejected and reported; the returned
    arrays then end at the last sample reached.
    """
    rhs = _RHS[flavor]
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    eta = a.imag
    f = np.array(f0, dtype=complex, ndmin=1)
    g = np.array(g0, dtype=complex, ndmin=1)
    times = np.asarray(times, dtype=float)

    f_out = np.empty((len(times), f.size), dtype=complex)
    g_out = np.empty((len(times), g.size), dtype=complex)
    f_out[0], g_out[0] = f, g

    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, len(times)):
            t0 = times[i - 1]
            n_sub = _substeps(times[i] - t0, dt)
            h = (times[i] - t0) / n_sub
            for step in range(n_sub):
                t = t0 + step * h
                f_next, g_next = _rk4_step(rhs, a, b, eta, f, g, h)

                over = np.abs(g_next) > cap
                if over.any():
                    report = DivergenceReport(
                        mode_index=int(np.flatnonzero(over)[0]),
                        bracket=(float(t), float(t + h)),
                        time_estimate=float(t + 0.5 * h),
                        last_sample_time=float(t0),
                        cap=cap,
                    )
                    return f_out[:i], g_out[:i], report

                finite = np.isfinite(f_next) & np.isfinite(g_next)
                if not finite.all():
                    bad = int(np.flatnonzero(~finite)[0])
                    log.error("Non-finite correlators below the cap", mode=bad, time=float(t + h))
                    raise NumericalFailure(f"Non-finite correlators for mode {bad} at t={t + h:.6g}")
                f, g = f_next, g_next
            f_out[i], g_out[i] = f, g

    return f_out, g_out, None


def logistic_blowup_time(g0: float, gamma: float) -> float:
    """Blow-up time of dG/dt = 2 gamma G (1 + G); infinite when nothing grows."""
    if g0 <= 0.0 or gamma <= 0.0:
        return math.inf
    return math.log((1.0 + g0) / g0) / (2.0 * gamma)


def single_site_exact(gamma: float, alpha: complex, beta: complex, t):
    """Down-state population of one spin under the no-click evolution."""
    pa, pb = abs(alpha) ** 2, abs(beta) ** 2
    if abs(pa + pb - 1.0) > 1e-12:
        raise DomainError(f"Amplitudes must be normalised (|alpha|^2 + |beta|^2 = {pa + pb})")
    return pb / (pb + pa * np.exp(-2.0 * gamma * np.asarray(t, dtype=float)))


# ------------------------------------------------------------------
# FULL-GRID INTEGRATION
# ------------------------------------------------------------------
def _propagate_chunk(task):
    flavor, a, b, f0, g0, times, dt, cap = task
    return propagate_modes(flavor, a, b, f0, g0, times, dt, cap)


def _run_chunks(tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [_propagate_chunk(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(_propagate_chunk, tasks))


def integrate(
    flavor: Flavor,
    spec: QuenchSpec,
    init: ModeState,
    grid: KGrid,
    workers: Optional[int] = None,
    cap: float = Config.DIVERGENCE_CAP,
) -> Trajectory:
    """Integrate every grid mode after the quench.

    Modes are cut into fixed chunks of ``Config.CHUNK_MODES`` so the result is
    the same for any worker count. When the initial data respect the k -> -k
    parity, only one mode per pair is integrated and the rest mirrored.
    """
    with bound_contextvars(flavor=flavor.value, n_sites=spec.post.n_sites, dimension=spec.post.dimension):
        return _integrate_grid(flavor, spec, init, grid, workers, cap)


def _integrate_grid(
    flavor: Flavor, spec: QuenchSpec, init: ModeState, grid: KGrid, workers: Optional[int], cap: float
) -> Trajectory:
    workers = Config.WORKERS if workers is None else workers
    log.info(
        "Quench integration started",
        n_modes=len(grid),
        t_end=spec.t_end,
        steps=spec.steps,
        dt=spec.dt,
        workers=workers,
        **spec.post.model_dump(),
    )

    coeffs = coeffs_over_grid(flavor, spec.post, grid)
    a = np.broadcast_to(np.asarray(coeffs.a, dtype=complex), (len(grid),))
    b = np.broadcast_to(np.asarray(coeffs.b, dtype=complex), (len(grid),))
    f0 = np.asarray(init.f, dtype=complex)
    g0 = np.asarray(init.g, dtype=complex)
    if f0.shape != (len(grid),) or g0.shape != (len(grid),):
        raise DomainError(f"Initial state has shape {f0.shape}, grid has {len(grid)} modes")

    # F is even in k for bosons, odd for fermions; G is always even
    parity = 1.0 if flavor is Flavor.BOSONIC else -1.0
    neg = grid.neg_index
    paired = neg != np.arange(len(grid))
    symmetric = np.array_equal(g0[neg][paired], g0[paired]) and np.array_equal(
        f0[neg][paired], parity * f0[paired]
    )
    active = grid.representatives if symmetric else np.arange(len(grid))
    if not symmetric:
        log.warning("Initial data not k -> -k symmetric; integrating the full grid")

    times = spec.times
    tasks = [
        (flavor, a[idx], b[idx], f0[idx], g0[idx], times, spec.dt, cap)
        for idx in (active[i : i + Config.CHUNK_MODES] for i in range(0, len(active), Config.CHUNK_MODES))
    ]
    results = _run_chunks(tasks, workers)

    # earliest divergence wins, ties go to the lowest grid index
    divergence: Optional[DivergenceReport] = None
    for chunk_no, (_, _, report) in enumerate(results):
        if report is None:
            continue
        global_mode = int(active[chunk_no * Config.CHUNK_MODES + report.mode_index])
        candidate = DivergenceReport(
            mode_index=global_mode,
            bracket=report.bracket,
            time_estimate=report.time_estimate,
            last_sample_time=report.last_sample_time,
            cap=report.cap,
        )
        if divergence is None or candidate.bracket[0] < divergence.bracket[0]:
            divergence = candidate
    n_keep = min(len(f_chunk) for f_chunk, _, _ in results)

    f = np.empty((n_keep, len(grid)), dtype=complex)
    g = np.empty((n_keep, len(grid)), dtype=complex)
    f[:, active] = np.concatenate([f_chunk[:n_keep] for f_chunk, _, _ in results], axis=1)
    g[:, active] = np.concatenate([g_chunk[:n_keep] for _, g_chunk, _ in results], axis=1)
    if symmetric:
        mirrored = np.setdiff1d(np.arange(len(grid)), active)
        f[:, mirrored] = parity * f[:, neg[mirrored]]
        g[:, mirrored] = g[:, neg[mirrored]]

    drift = np.abs(g.imag) > 1e-9 * np.maximum(1.0, np.abs(g.real))
    if drift.any():
        log.warning("Occupation acquired an imaginary part", max_imag=float(np.abs(g.imag).max()))

    if divergence is not None:
        log.warning("Trajectory diverged", **divergence.as_dict(), kept_samples=n_keep)
    log.info("Quench integration completed", samples=n_keep)
    return Trajectory(
        flavor=flavor,
        params=spec.post,
        grid=grid,
        times=times[:n_keep],
        f=f,
        g=g,
        divergence=divergence,
    )
