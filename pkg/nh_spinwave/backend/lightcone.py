from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from nh_spinwave.backend.config import Config
from nh_spinwave.backend.observables import CorrelationField
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log
from nh_spinwave.backend.exception.custom_exception import DomainError


@dataclass(frozen=True)
class EdgeFit:
    """Straight line R = velocity * t + intercept through tracked (R, t) points."""

    points: np.ndarray
    velocity: float
    intercept: float
    rms: float
    threshold: Optional[float] = None
    label: str = "edge"

    @property
    def n_points(self) -> int:
        return len(self.points)

    def summary(self) -> dict:
        return {
            "label": self.label,
            "velocity": self.velocity,
            "intercept": self.intercept,
            "rms": self.rms,
            "threshold": self.threshold,
            "n_points": self.n_points,
        }

    def points_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"label": self.label, "R": self.points[:, 0], "t": self.points[:, 1]})


def _check_fraction(threshold_fraction: float) -> None:
    if not 0.0 < threshold_fraction < 1.0:
        raise DomainError(f"threshold_fraction must lie in (0, 1) (got {threshold_fraction})")


def _active_mask(field: CorrelationField, threshold_fraction: float) -> np.ndarray:
    magnitude = np.abs(field.values.real)
    scale = magnitude.max() if magnitude.size else 0.0
    if scale == 0.0:
        raise DomainError("Correlation field vanishes everywhere; nothing to track")
    return magnitude >= threshold_fraction * scale


def activation_times(field: CorrelationField, threshold_fraction: float = Config.THRESHOLD_FRACTION) -> np.ndarray:
    """(R, t_R) for every distance whose |Re| reaches the fraction of the global maximum."""
    _check_fraction(threshold_fraction)
    if field.dimension != 1:
        raise DomainError("Activation times are tracked on a 1D distance axis")

    active = _active_mask(field, threshold_fraction)
    reached = active.any(axis=1)
    first = active.argmax(axis=1)
    points = np.column_stack(
        [field.distances[reached, 0].astype(float), field.times[first[reached]]]
    )
    if len(points) == 0:
        raise DomainError(f"No distance reaches {threshold_fraction} of the field maximum")
    return points


def fit_velocity(points: Sequence, threshold: Optional[float] = None, label: str = "edge") -> EdgeFit:
    """Least squares of R against t; the slope is the velocity."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) < 3:
        raise DomainError(f"A velocity fit needs at least 3 points (got {len(points)})")
    r, t = points[:, 0], points[:, 1]
    if np.all(t == t[0]):
        raise DomainError("All activation times are equal; the velocity is undefined")

    fit = stats.linregress(t, r)
    residual = r - (fit.slope * t + fit.intercept)
    return EdgeFit(
        points=points,
        velocity=float(fit.slope),
        intercept=float(fit.intercept),
        rms=float(np.sqrt(np.mean(residual**2))),
        threshold=threshold,
        label=label,
    )


# ------------------------------------------------------------------
# RIDGES OF LOCAL EXTREMA
# ------------------------------------------------------------------
def _extrema_at(values: np.ndarray, r: np.ndarray, allowed: np.ndarray) -> List[tuple]:
    """Interior extrema of one time slice as (position, kind); kind +1 max, -1 min."""
    found = []
    for i in range(1, len(values) - 1):
        if not allowed[i]:
            continue
        left, mid, right = values[i - 1], values[i], values[i + 1]
        if mid > left and mid > right:
            kind = 1
        elif mid < left and mid < right:
            kind = -1
        else:
            continue
        curvature = left - 2.0 * mid + right
        offset = 0.5 * (left - right) / curvature if curvature != 0.0 else 0.0
        found.append((r[i] + offset * 0.5 * (r[i + 1] - r[i - 1]), kind))
    return found


def track_extrema(
    field: CorrelationField,
    ridge_count: int = 3,
    threshold_fraction: float = Config.THRESHOLD_FRACTION,
    max_jump: float = Config.RIDGE_MAX_JUMP,
) -> List[EdgeFit]:
    """Follow local extrema of Re value(R) through time and fit each ridge.

    Only extrema at or after the activation time of their distance take
    part. Extrema are linked
    to a ridge of the same kind from the previous sample when they lie within
    ``max_jump`` sites; closest pairs are linked first. Ridges with fewer than
    three samples are dropped, the rest are returned longest first.
    """
    _check_fraction(threshold_fraction)
    if field.dimension != 1:
        raise DomainError("Extrema tracking needs a 1D field")

    order = np.argsort(field.distances[:, 0], kind="stable")
    r = field.distances[order, 0].astype(float)
    values = field.values.real[order]
    active = _active_mask(field, threshold_fraction)[order]
    # causal region: at and after each distance's activation time
    allowed = np.cumsum(active, axis=1) > 0

    ridges: List[dict] = []
    open_ridges: List[int] = []
    for j, t in enumerate(field.times):
        extrema = _extrema_at(values[:, j], r, allowed[:, j])
        candidates = sorted(
            (abs(pos - ridges[ri]["points"][-1][0]), ri, ei)
            for ei, (pos, kind) in enumerate(extrema)
            for ri in open_ridges
            if ridges[ri]["kind"] == kind and abs(pos - ridges[ri]["points"][-1][0]) <= max_jump
        )
        taken_ridges, taken_extrema = set(), set()
        for _, ri, ei in candidates:
            if ri in taken_ridges or ei in taken_extrema:
                continue
            ridges[ri]["points"].append((extrema[ei][0], float(t)))
            taken_ridges.add(ri)
            taken_extrema.add(ei)

        next_open = sorted(taken_ridges)
        for ei, (pos, kind) in enumerate(extrema):
            if ei not in taken_extrema:
                ridges.append({"kind": kind, "points": [(pos, float(t))]})
                next_open.append(len(ridges) - 1)
        open_ridges = next_open

    long_ridges = [ridge for ridge in ridges if len(ridge["points"]) >= 3]
    long_ridges.sort(key=lambda ridge: (-len(ridge["points"]), ridge["points"][0][1], ridge["points"][0][0]))

    fits = [
        fit_velocity(ridge["points"], threshold=threshold_fraction, label=f"ridge_{n}_{'max' if ridge['kind'] > 0 else 'min'}")
        for n, ridge in enumerate(long_ridges[:ridge_count])
    ]
    log.info("Ridges tracked", found=len(long_ridges), kept=len(fits), threshold=threshold_fraction)
    return fits


def dominant_ridge(fits: Sequence[EdgeFit]) -> EdgeFit:
    """Smallest rms among ridges at least half as long as the longest one."""
    if not fits:
        raise DomainError("No ridge long enough to fit")
    longest = max(fit.n_points for fit in fits)
    eligible = [fit for fit in fits if 2 * fit.n_points >= longest]
    return min(eligible, key=lambda fit: fit.rms)


# ------------------------------------------------------------------
# SQUARE LATTICE
# ------------------------------------------------------------------
def _profile(field: CorrelationField, distances: np.ndarray, values: np.ndarray, kind: str) -> CorrelationField:
    return CorrelationField(
        kind=kind,
        flavor=field.flavor,
        distances=np.asarray(distances, dtype=np.int64).reshape(-1, 1),
        times=field.times,
        values=values,
        provenance=field.provenance,
    )


def radial_profile(field: CorrelationField) -> CorrelationField:
    """Mean |Re value| over the lattice points of every integer |R| shell."""
    if field.dimension != 2:
        raise DomainError("Radial profiles need a 2D field")
    shell = np.rint(np.hypot(field.distances[:, 0], field.distances[:, 1])).astype(np.int64)
    radii, members = np.unique(shell, return_inverse=True)
    totals = np.zeros((len(radii), len(field.times)))
    np.add.at(totals, members, np.abs(field.values.real))
    counts = np.bincount(members, minlength=len(radii)).astype(float)
    return _profile(field, radii, totals / counts[:, None], "radial")


def axis_profile(field: CorrelationField, axis: int = 0) -> CorrelationField:
    """Values along one lattice axis with the other offset zero, indexed by |offset|."""
    if field.dimension != 2 or axis not in (0, 1):
        raise DomainError("Axis profiles need a 2D field and axis 0 or 1")
    on_axis = np.flatnonzero(field.distances[:, 1 - axis] == 0)
    if on_axis.size == 0:
        raise DomainError("Field has no points on the requested axis")
    offset = np.abs(field.distances[on_axis, axis])
    # x and -x carry the same value; keep the first of each |offset|
    _, first = np.unique(offset, return_index=True)
    keep = on_axis[first]
    return _profile(field, np.abs(field.distances[keep, axis]), field.values[keep], f"axis_{'xy'[axis]}")


def window_field(field: CorrelationField, r_window: Optional[Tuple[int, int]]) -> CorrelationField:
    """Restrict a 1D field to r_min <= R <= r_max; None keeps every distance."""
    if r_window is None:
        return field
    r_min, r_max = r_window
    if r_min > r_max:
        raise DomainError(f"Empty fit window ({r_min}, {r_max})")
    keep = (field.distances[:, 0] >= r_min) & (field.distances[:, 0] <= r_max)
    if not keep.any():
        raise DomainError(f"No distance inside the fit window ({r_min}, {r_max})")
    return replace(field, distances=field.distances[keep], values=field.values[keep])


def profile_edge(
    profile: CorrelationField,
    threshold_fraction: float = Config.THRESHOLD_FRACTION,
    r_window: Optional[Tuple[int, int]] = None,
    label: str = "edge",
) -> EdgeFit:
    """Activation-time edge of a 1D profile inside the fit window."""
    windowed = window_field(profile, r_window)
    return fit_velocity(activation_times(windowed, threshold_fraction), threshold=threshold_fraction, label=label)


def radial_edge_2d(
    field: CorrelationField,
    threshold_fraction: float = Config.THRESHOLD_FRACTION,
    r_window: Optional[Tuple[int, int]] = None,
) -> EdgeFit:
    """First activation of every |R| shell of the radial profile, fitted against |R|."""
    _check_fraction(threshold_fraction)
    fit = profile_edge(radial_profile(field), threshold_fraction, r_window, "radial")
    log.info("Radial edge fitted", velocity=fit.velocity, n_points=fit.n_points, window=r_window)
    return fit


def axis_edge_2d(
    field: CorrelationField,
    axis: int = 0,
    threshold_fraction: float = Config.THRESHOLD_FRACTION,
    r_window: Optional[Tuple[int, int]] = None,
) -> EdgeFit:
    """First activation of every |x| (or |y|) along one axis, fitted against the offset."""
    _check_fraction(threshold_fraction)
    profile = axis_profile(field, axis)
    fit = profile_edge(profile, threshold_fraction, r_window, profile.kind)
    log.info("Axis edge fitted", axis=axis, velocity=fit.velocity, n_points=fit.n_points, window=r_window)
    return fit
