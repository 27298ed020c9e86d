from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from nh_spinwave.backend.config import Config
from nh_spinwave.backend.models import Flavor, GuessEnvelope, ModelParams
from nh_spinwave.backend.lattice import bosonic_coeffs, make_kgrid
from nh_spinwave.backend.spectra import dispersion
from nh_spinwave.backend.dynamics import Trajectory
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log
from nh_spinwave.backend.exception.custom_exception import DomainError

AXIS_NAMES = ("x", "y", "z")


@dataclass(frozen=True)
class CorrelationField:
    """A real-space observable sampled on (distance, time); ``values`` is (distances, times)."""

    kind: str
    flavor: Optional[Flavor]
    distances: np.ndarray
    times: np.ndarray
    values: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.distances.shape[1]

    def distance_columns(self) -> list:
        if self.dimension == 1:
            return ["R"]
        return list(AXIS_NAMES[: self.dimension])

    def to_frame(self) -> pd.DataFrame:
        n_r, n_t = self.values.shape
        frame = pd.DataFrame(
            {name: np.repeat(self.distances[:, j], n_t) for j, name in enumerate(self.distance_columns())}
        )
        frame["t"] = np.tile(self.times, n_r)
        frame["Re"] = self.values.real.ravel()
        frame["Im"] = self.values.imag.ravel()
        if self.kind == "zz":
            with np.errstate(divide="ignore"):
                frame["log10_abs_Re"] = np.log10(np.abs(frame["Re"].to_numpy()))
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, kind: str, flavor: Optional[Flavor] = None) -> "CorrelationField":
        columns = ["R"] if "R" in frame.columns else [c for c in AXIS_NAMES if c in frame.columns]
        if not columns or not {"t", "Re"} <= set(frame.columns):
            raise DomainError("Correlation table needs distance columns (R or x, y), t and Re")
        frame = frame.sort_values(columns + ["t"], kind="stable")
        times = np.unique(frame["t"].to_numpy())
        distances = frame[columns].drop_duplicates().to_numpy(dtype=np.int64)
        if len(frame) != len(distances) * len(times):
            raise DomainError("Correlation table is not a full (distance, time) grid")
        im = frame["Im"].to_numpy() if "Im" in frame.columns else 0.0
        values = (frame["Re"].to_numpy() + 1j * im).reshape(len(distances), len(times))
        return cls(kind=kind, flavor=flavor, distances=distances, times=times, values=values)


def as_distances(params: ModelParams, distances: Sequence) -> np.ndarray:
    """Validate site offsets; returns an integer array of shape (n, dimension)."""
    arr = np.asarray(distances, dtype=float)
    if arr.ndim <= 1 and params.dimension == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != params.dimension:
        raise DomainError(f"Distances must have {params.dimension} components each")
    half = params.n_sites // 2
    if np.any(arr != np.round(arr)) or np.any(np.abs(arr) > half):
        raise DomainError(f"Distances must be integer offsets within [-{half}, {half}]")
    return arr.astype(np.int64)


def _cosine_transform(points: np.ndarray, distances: np.ndarray, values: np.ndarray) -> np.ndarray:
    """sum_k cos(k.R) values[:, k] for every distance, in fixed-size distance blocks."""
    out = np.empty((len(distances), values.shape[0]), dtype=complex)
    re, im = values.real.T, values.imag.T
    for start in range(0, len(distances), Config.DISTANCE_BLOCK):
        block = distances[start : start + Config.DISTANCE_BLOCK]
        kernel = np.cos(block @ points.T)
        out[start : start + len(block)] = kernel @ re + 1j * (kernel @ im)
    return out


def one_body_correlation(traj: Trajectory, distances: Sequence) -> CorrelationField:
    """G_R(t) = N^-D sum_k cos(k.R) G_k(t)."""
    if traj.flavor is not Flavor.BOSONIC:
        log.warning("One-body field evaluated on a fermionic trajectory as a diagnostic")
    dist = as_distances(traj.params, distances)
    log.info("One-body correlation started", n_distances=len(dist), samples=len(traj.times))

    values = _cosine_transform(traj.grid.points, dist, traj.g) / traj.params.n_modes

    log.info("One-body correlation completed")
    return CorrelationField(
        kind="one_body",
        flavor=traj.flavor,
        distances=dist,
        times=traj.times,
        values=values,
        provenance=traj.params.model_dump(),
    )


def zz_correlation(traj: Trajectory, distances: Sequence, flavor: Optional[Flavor] = None) -> CorrelationField:
    """Connected zz correlation of the chain from one pass of Fourier sums per distance.

    With S_F(R) = sum_k e^{-ikR} F_k and S_G(R) = sum_k e^{ikR} G_k the double
    momentum sum collapses to
    C_R = N^-2 [ |S_F(R)|^2 + S_G(R) (N delta_{R,0} +/- S_G(-R)) ],
    plus for bosons, minus for fermions.
    """
    flavor = flavor or traj.flavor
    if traj.params.dimension != 1:
        raise DomainError("zz correlations are implemented for the 1D chain only")
    dist = as_distances(traj.params, distances)
    n = traj.params.n_sites
    sign = 1.0 if flavor is Flavor.BOSONIC else -1.0
    log.info("zz correlation started", flavor=flavor.value, n_distances=len(dist))

    phases = np.exp(1j * np.outer(dist[:, 0], traj.grid.points[:, 0]))
    s_f = np.conj(phases) @ traj.f.T
    s_g = phases @ traj.g.T
    s_g_neg = np.conj(phases) @ traj.g.T
    delta = (np.mod(dist[:, 0], n) == 0).astype(float)[:, None] * n

    values = (s_f.real**2 + s_f.imag**2 + s_g * (delta + sign * s_g_neg)) / n**2

    log.info("zz correlation completed", flavor=flavor.value)
    return CorrelationField(
        kind="zz",
        flavor=flavor,
        distances=dist,
        times=traj.times,
        values=values,
        provenance=traj.params.model_dump(),
    )


def magnetization(traj: Trajectory) -> np.ndarray:
    """<S^z> = 1/2 - mean_k Re G_k at every sample (site independent)."""
    return 0.5 - traj.g.real.mean(axis=1)


def envelope(k: np.ndarray, sigma: float = Config.GUESS_SIGMA) -> np.ndarray:
    """Three Gaussians of width sigma centred at 0 and at both zone edges."""
    k = np.asarray(k, dtype=float)
    two_s2 = 2.0 * sigma * sigma
    return np.exp(-((k - np.pi) ** 2) / two_s2) + np.exp(-((k + np.pi) ** 2) / two_s2) + np.exp(-(k**2) / two_s2)


def guess_correlation(
    params: ModelParams,
    envelope_params: GuessEnvelope,
    distances: Sequence,
    times: Sequence[float],
    use_dispersion: bool = False,
) -> CorrelationField:
    """Closed-form estimate of G_R(t) built from a Gaussian momentum envelope.

    Each mode oscillates at twice Re A_k and grows as exp(2 Im A_k t); with
    ``use_dispersion`` the exact bosonic E_k replaces A_k.
    """
    if params.dimension != 1:
        raise DomainError("The guessed correlation is defined for the 1D chain only")
    dist = as_distances(params, distances)
    times = np.asarray(times, dtype=float)
    grid = make_kgrid(params)
    k = grid.points[:, 0]

    coeffs = bosonic_coeffs(params, grid.points)
    if use_dispersion:
        x, defined = dispersion(Flavor.BOSONIC, coeffs)
        if not np.all(defined):
            raise DomainError("Dispersion undefined on part of the grid; use the A_k form instead")
    else:
        x = np.asarray(coeffs.a)

    weights = envelope(k, envelope_params.sigma)
    modes = weights[None, :] * np.cos(2.0 * np.outer(times, x.real)) * np.exp(2.0 * np.outer(times, x.imag))
    values = _cosine_transform(grid.points, dist, modes + 0j) / params.n_modes

    log.info(
        "Guess correlation built",
        sigma=envelope_params.sigma,
        use_dispersion=use_dispersion,
        n_distances=len(dist),
        samples=len(times),
    )
    return CorrelationField(
        kind="guess",
        flavor=Flavor.BOSONIC,
        distances=dist,
        times=times,
        values=values,
        provenance={**params.model_dump(), "sigma": envelope_params.sigma, "use_dispersion": use_dispersion},
    )
