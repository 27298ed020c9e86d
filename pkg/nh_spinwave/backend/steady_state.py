from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import polynomial as P

from nh_spinwave.backend.models import Flavor, ModelParams
from nh_spinwave.backend.lattice import CoeffPair, KGrid, coeffs_over_grid, make_kgrid
from nh_spinwave.backend.dynamics import ModeState
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log
from nh_spinwave.backend.exception.custom_exception import DomainError, NumericalFailure

REAL_TOLERANCE = 1e-9
CLAMP_TOLERANCE = 1e-12


@dataclass(frozen=True)
class StationaryRoot:
    k: Tuple[float, ...]
    roots: np.ndarray
    selected: float
    residual: float
    f: complex


@dataclass(frozen=True)
class StationarySolution:
    flavor: Flavor
    grid: KGrid
    roots: List[StationaryRoot]
    magnetization: float

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({f"k_{j + 1}": self.grid.points[:, j] for j in range(self.grid.dimension)})
        frame["selected_G"] = [root.selected for root in self.roots]
        frame["residual"] = [root.residual for root in self.roots]
        return frame


def stationary_polynomial(flavor: Flavor, coeffs: CoeffPair) -> np.ndarray:
    """Real quartic (ascending powers) whose roots are the stationary occupations."""
    a = complex(coeffs.a)
    eta = a.imag
    if eta == 0.0:
        raise DomainError("Stationary occupations are undefined for a Hermitian mode (Im a = 0)")
    abs_a2 = a.real**2 + a.imag**2

    if flavor is Flavor.BOSONIC:
        b2 = complex(coeffs.b).real ** 2
        return np.array(
            [
                -2.0 * b2 * eta,
                8.0 * eta * (abs_a2 - b2),
                8.0 * eta * (abs_a2 - b2 + 4.0 * eta**2),
                64.0 * eta**3,
                32.0 * eta**3,
            ]
        )

    # b is pure imaginary, so b^2 = -(Im b)^2 is real
    b2 = (complex(coeffs.b) ** 2).real
    return np.array(
        [
            16.0 * b2 * eta,
            64.0 * eta * (abs_a2 - b2),
            64.0 * eta * (b2 - abs_a2) - 256.0 * eta**3,
            512.0 * eta**3,
            -256.0 * eta**3,
        ]
    )


def stationary_pair(flavor: Flavor, coeffs: CoeffPair, g: float) -> ModeState:
    """Fixed point of the F equation for a given stationary occupation."""
    a, b = complex(coeffs.a), complex(coeffs.b)
    eta = a.imag
    if flavor is Flavor.BOSONIC:
        f = 1j * b * (1.0 + 2.0 * g) / (4.0 * eta * g - 2j * a)
    else:
        f = 2j * b * (1.0 - 2.0 * g) / (8.0 * eta * g + 4j * a)
    return ModeState(f=complex(f), g=complex(g))


def _select_root(flavor: Flavor, poly: np.ndarray, k: Tuple[float, ...]) -> Tuple[np.ndarray, float]:
    roots = P.polyroots(poly)
    real = roots[np.abs(roots.imag) <= REAL_TOLERANCE * (1.0 + np.abs(roots))].real
    real = np.where((real < 0.0) & (real >= -CLAMP_TOLERANCE), 0.0, real)

    if flavor is Flavor.BOSONIC:
        admissible = real[real >= 0.0]
    else:
        admissible = real[(real >= 0.0) & (real <= 1.0 + CLAMP_TOLERANCE)]
    if admissible.size == 0:
        log.error("No admissible stationary root", flavor=flavor.value, k=list(k), roots=[str(r) for r in roots])
        raise NumericalFailure(f"No admissible real stationary root at k={list(k)}; roots are {roots.tolist()}")

    selected = float(admissible.min())
    slope = P.polyval(selected, P.polyder(poly))
    if slope != 0.0 and selected != 0.0:
        polished = selected - P.polyval(selected, poly) / slope
        if abs(P.polyval(polished, poly)) <= abs(P.polyval(selected, poly)):
            selected = float(polished)
    return roots, max(selected, 0.0)


def solve_stationary(flavor: Flavor, params: ModelParams, grid: Optional[KGrid] = None) -> StationarySolution:
    """Stationary occupation of every mode and the resulting magnetization (gamma < 0 only)."""
    if params.gamma > 0.0:
        raise DomainError("Stationary solutions are only selected for gamma < 0; the dynamics diverges for gamma > 0")
    if params.gamma == 0.0:
        raise DomainError("Stationarity is degenerate at gamma = 0")

    log.info("Steady state started", flavor=flavor.value, **params.model_dump())
    grid = grid if grid is not None else make_kgrid(params)
    coeffs = coeffs_over_grid(flavor, params, grid)
    a_all = np.broadcast_to(np.asarray(coeffs.a), (len(grid),))
    b_all = np.broadcast_to(np.asarray(coeffs.b), (len(grid),))

    roots: List[StationaryRoot] = []
    for k, a, b in zip(grid.points, a_all, b_all):
        pair = CoeffPair(a=complex(a), b=complex(b), flavor=flavor)
        poly = stationary_polynomial(flavor, pair)
        k_tuple = tuple(float(x) for x in k)
        all_roots, selected = _select_root(flavor, poly, k_tuple)
        roots.append(
            StationaryRoot(
                k=k_tuple,
                roots=all_roots,
                selected=selected,
                residual=float(abs(P.polyval(selected, poly))),
                f=complex(stationary_pair(flavor, pair, selected).f),
            )
        )

    occupations = np.array([root.selected for root in roots])
    value = float(0.5 - occupations.mean())
    log.info(
        "Steady state completed",
        flavor=flavor.value,
        magnetization=value,
        max_residual=float(max(root.residual for root in roots)),
    )
    return StationarySolution(flavor=flavor, grid=grid, roots=roots, magnetization=value)
