from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np
import pandas as pd

from nh_spinwave.backend.models import Flavor, ModelParams
from nh_spinwave.backend.lattice import (
    CoeffPair,
    KGrid,
    Momentum,
    coeffs_over_grid,
    make_kgrid,
)
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log
from nh_spinwave.backend.exception.custom_exception import DomainError


@dataclass(frozen=True)
class DispersionPoint:
    k: Tuple[float, ...]
    energy: complex
    angle: complex
    defined: bool


@dataclass(frozen=True)
class Spectrum:
    """Quasiparticle energies and Bogolyubov angles over a whole grid, in grid order."""

    flavor: Flavor
    grid: KGrid
    energy: np.ndarray
    angle: np.ndarray
    defined: np.ndarray

    @property
    def points(self) -> List[DispersionPoint]:
        return [
            DispersionPoint(tuple(float(x) for x in k), complex(e), complex(t), bool(d))
            for k, e, t, d in zip(self.grid.points, self.energy, self.angle, self.defined)
        ]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {f"k_{j + 1}": self.grid.points[:, j] for j in range(self.grid.dimension)}
        )
        frame["Re_E"] = self.energy.real
        frame["Im_E"] = self.energy.imag
        frame["Re_theta"] = self.angle.real
        frame["Im_theta"] = self.angle.imag
        frame["defined"] = self.defined.astype(int)
        return frame


def _angle_ratio(flavor: Flavor, a, b):
    if flavor is Flavor.BOSONIC:
        return -b / a
    return 1j * b / a


def _warn_branch(flavor: Flavor, ratio) -> None:
    magnitude = np.max(np.abs(ratio)) if np.size(ratio) else 0.0
    if magnitude >= 1.0:
        log.warning(
            "Bogolyubov angle argument reaches the branch cut; principal branch used",
            flavor=flavor.value,
            max_ratio=float(magnitude),
        )


def bogolyubov_angle(flavor: Flavor, coeffs: CoeffPair) -> Union[complex, np.ndarray]:
    """theta = arctanh(-B/A) for bosons, arctan(i B / A) for fermions (principal branch)."""
    a = np.asarray(coeffs.a)
    if np.any(a == 0):
        raise DomainError("Bogolyubov angle is undefined where a = 0")
    ratio = _angle_ratio(flavor, a, np.asarray(coeffs.b))
    _warn_branch(flavor, ratio)
    if flavor is Flavor.BOSONIC:
        return np.arctanh(ratio)
    return np.arctan(ratio)


def dispersion(flavor: Flavor, coeffs: CoeffPair) -> Tuple[Union[complex, np.ndarray], Union[bool, np.ndarray]]:
    """sgn(Re a) sqrt(a^2 - b^2), doubled for fermions.

    Points with Re a == 0 are returned as NaN with ``defined`` False.
    """
    a = np.asarray(coeffs.a, dtype=complex)
    b = np.asarray(coeffs.b, dtype=complex)
    sign = np.sign(a.real)
    energy = sign * np.sqrt(a * a - b * b)
    if flavor is Flavor.FERMIONIC:
        energy = 2.0 * energy
    defined = sign != 0
    energy = np.where(defined, energy, np.nan + 1j * np.nan)
    if energy.ndim == 0:
        return complex(energy), bool(defined)
    return energy, defined


def dispersion_expansion(flavor: Flavor, params: ModelParams, k: Momentum, order: int) -> Union[complex, np.ndarray]:
    """Small-J series of the dispersion around h + i gamma, first or second order."""
    if params.dimension != 1:
        raise DomainError("The dispersion expansion is only available in 1D")
    if order not in (1, 2):
        raise DomainError(f"Expansion order must be 1 or 2 (got {order})")

    k = np.asarray(k, dtype=float)
    z = params.h + 1j * params.gamma
    value = z + 0.5 * params.J * np.cos(k)
    if order == 2:
        if flavor is Flavor.BOSONIC:
            value = value - params.J**2 * np.cos(k) ** 2 / (8.0 * z)
        else:
            value = value + params.J**2 * np.sin(k) ** 2 / (8.0 * z)
    return value


def spectrum_over_grid(flavor: Flavor, params: ModelParams, grid: KGrid | None = None) -> Spectrum:
    log.info("Spectrum started", flavor=flavor.value, **params.model_dump())
    grid = grid if grid is not None else make_kgrid(params)
    coeffs = coeffs_over_grid(flavor, params, grid)

    energy, defined = dispersion(flavor, coeffs)
    a = np.asarray(coeffs.a)
    safe_a = np.where(a == 0, 1.0, a)
    ratio = _angle_ratio(flavor, safe_a, np.asarray(coeffs.b))
    _warn_branch(flavor, ratio[a != 0])
    angle = np.arctanh(ratio) if flavor is Flavor.BOSONIC else np.arctan(ratio)
    angle = np.where(a == 0, np.nan + 1j * np.nan, angle)

    n_undefined = int(np.count_nonzero(~defined))
    if n_undefined:
        log.warning("Spectrum undefined where Re a = 0", flavor=flavor.value, points=n_undefined)
    log.info("Spectrum completed", flavor=flavor.value, n_points=len(grid))
    return Spectrum(flavor=flavor, grid=grid, energy=energy, angle=angle, defined=defined)


def angle_over_grid(params: ModelParams) -> pd.DataFrame:
    """Bosonic and fermionic angles side by side on the 1D grid."""
    if params.dimension != 1:
        raise DomainError("Angle comparison is defined on the 1D chain only")
    boson = spectrum_over_grid(Flavor.BOSONIC, params)
    fermion = spectrum_over_grid(Flavor.FERMIONIC, params, grid=boson.grid)
    return pd.DataFrame(
        {
            "k": boson.grid.points[:, 0],
            "Re_theta_boson": boson.angle.real,
            "Im_theta_boson": boson.angle.imag,
            "Re_theta_fermion": fermion.angle.real,
            "Im_theta_fermion": fermion.angle.imag,
        }
    )
