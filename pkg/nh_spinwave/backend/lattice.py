from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from nh_spinwave.backend.models import Flavor, ModelParams
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log
from nh_spinwave.backend.exception.custom_exception import DomainError

Momentum = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class KGrid:
    """Momentum grid of a hypercubic lattice with ``n_sites`` points per axis.

    ``indices`` holds the integer labels n_j in [-N/2, N/2), ``points`` the
    momenta k_j = 2 pi n_j / N, both ordered lexicographically in n_j.
    ``neg_index[i]`` is the flat index of -k_i (k = -pi maps onto itself).
    """

    dimension: int
    n_sites: int
    indices: np.ndarray
    points: np.ndarray
    neg_index: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def flat_index(self, n: Sequence[int]) -> int:
        half = self.n_sites // 2
        n = np.atleast_1d(np.asarray(n, dtype=np.int64))
        if n.shape != (self.dimension,) or np.any(n < -half) or np.any(n >= half):
            raise DomainError(f"Label {n.tolist()} is not on the {self.dimension}D grid of {self.n_sites} sites")
        flat = 0
        for component in n:
            flat = flat * self.n_sites + int(component + half)
        return flat

    @property
    def representatives(self) -> np.ndarray:
        """Indices i with i <= index(-k_i): one member of every {k, -k} pair."""
        return np.flatnonzero(np.arange(len(self)) <= self.neg_index)


@dataclass(frozen=True)
class CoeffPair:
    """Coefficients (a, b) of one quadratic theory, scalar or per grid point."""

    a: Union[complex, np.ndarray]
    b: Union[complex, np.ndarray]
    flavor: Flavor


def make_kgrid(params: ModelParams) -> KGrid:
    n_sites, dim = params.n_sites, params.dimension
    if n_sites < 2 or n_sites % 2:
        raise DomainError(f"n_sites must be even so that k = -pi lies on the grid (got {n_sites})")

    half = n_sites // 2
    labels = np.arange(-half, half, dtype=np.int64)
    # lexicographic: the last axis varies fastest
    mesh = np.meshgrid(*([labels] * dim), indexing="ij")
    indices = np.stack([m.ravel() for m in mesh], axis=-1)
    points = np.pi * (2.0 * indices / n_sites)

    neg_labels = np.mod(-indices + half, n_sites) - half
    weights = n_sites ** np.arange(dim - 1, -1, -1, dtype=np.int64)
    neg_index = ((neg_labels + half) * weights).sum(axis=-1)

    log.info("Momentum grid built", dimension=dim, n_sites=n_sites, n_points=len(points))
    return KGrid(dimension=dim, n_sites=n_sites, indices=indices, points=points, neg_index=neg_index)


def _cos_sum(params: ModelParams, k: Momentum) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if params.dimension == 1 and (k.ndim == 0 or k.shape[-1] != 1):
        return np.cos(k)
    if k.shape[-1] != params.dimension:
        raise DomainError(f"Momentum has {k.shape[-1]} components, lattice dimension is {params.dimension}")
    return np.cos(k).sum(axis=-1)


def bosonic_coeffs(params: ModelParams, k: Momentum) -> CoeffPair:
    """A_k = h + i gamma + (J/2) sum_j cos k_j and B_k = (J/2) sum_j cos k_j."""
    b = 0.5 * params.J * _cos_sum(params, k)
    a = (params.h + b) + 1j * params.gamma
    return CoeffPair(a=a, b=b + 0j, flavor=Flavor.BOSONIC)


def fermionic_coeffs(params: ModelParams, k: Momentum) -> CoeffPair:
    """Jordan-Wigner coefficients of the chain; only defined in one dimension."""
    if params.dimension != 1:
        raise DomainError(f"The fermionic theory is restricted to 1D chains (got dimension {params.dimension})")

    k = np.asarray(k, dtype=float)
    if k.ndim > 1 and k.shape[-1] == 1:
        k = k[..., 0]
    elif k.ndim == 1 and k.shape == (1,):
        k = k[0]

    a = (0.25 * params.J * np.cos(k) + 0.5 * params.h) + 1j * (0.5 * params.gamma)
    b = 1j * (-0.25 * params.J * np.sin(k))
    return CoeffPair(a=a, b=b, flavor=Flavor.FERMIONIC)


def coeffs_over_grid(flavor: Flavor, params: ModelParams, grid: KGrid) -> CoeffPair:
    if flavor is Flavor.BOSONIC:
        return bosonic_coeffs(params, grid.points)
    return fermionic_coeffs(params, grid.points)
