import numpy as np
import pytest

from nh_spinwave.backend.exception.custom_exception import DomainError
from nh_spinwave.backend.lightcone import (
    EdgeFit,
    activation_times,
    axis_edge_2d,
    axis_profile,
    dominant_ridge,
    fit_velocity,
    profile_edge,
    radial_edge_2d,
    radial_profile,
    track_extrema,
    window_field,
)
from nh_spinwave.backend.config import Config
from nh_spinwave.backend.observables import CorrelationField

WAVE_NUMBER = 2.0 * np.pi / 10.0


def _field(distances, times, values):
    distances = np.asarray(distances, dtype=np.int64)
    if distances.ndim == 1:
        distances = distances[:, None]
    return CorrelationField(
        kind="synthetic",
        flavor=None,
        distances=distances,
        times=np.asarray(times, dtype=float),
        values=np.asarray(values, dtype=complex),
    )


@pytest.fixture
def step_front():
    """Unit signal switched on at R <= 2 t."""
    r = np.arange(0, 41)
    t = np.linspace(0.0, 20.0, 2001)
    return _field(r, t, np.where(r[:, None] <= 2.0 * t[None, :], 1.0, 0.0))


@pytest.fixture
def travelling_wave():
    """cos(t + q R): crests move towards smaller R at 1/q sites per unit time."""
    r = np.arange(0, 61)
    t = np.linspace(0.0, 10.0, 101)
    return _field(r, t, np.cos(t[None, :] + WAVE_NUMBER * r[:, None]))


@pytest.fixture
def expanding_disc():
    """Unit signal inside |R| <= 3 t on a 41 x 41 block of offsets."""
    axis = np.arange(-20, 21)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    distances = np.column_stack([x.ravel(), y.ravel()])
    t = np.linspace(0.0, 6.0, 121)
    radius = np.hypot(distances[:, 0], distances[:, 1])
    return _field(distances, t, np.where(radius[:, None] <= 3.0 * t[None, :], 1.0, 0.0))


@pytest.fixture
def tailed_front():
    """Front at R = 1.5 t with an exponential tail ahead of it.

    Every level set of the tail moves at 1.5, so the edge velocity does not
    depend on the threshold or on which distances enter the fit.
    """
    r = np.arange(0, 41)
    t = np.linspace(0.0, 20.0, 2001)
    ahead = np.maximum(0.0, r[:, None] - 1.5 * t[None, :])
    return _field(r, t, np.exp(-2.0 * ahead))


class TestEdge:
    """Activation times and the straight-line fit through them."""

    def test_activation_times_follow_the_front(self, step_front):
        points = activation_times(step_front, 1e-3)
        assert len(points) == 41
        assert np.allclose(points[:, 1], points[:, 0] / 2.0, atol=0.011)

    def test_front_velocity(self, step_front):
        fit = fit_velocity(activation_times(step_front), threshold=1e-3)
        assert np.isclose(fit.velocity, 2.0, atol=1e-2)
        assert fit.rms < 0.05
        assert fit.summary()["n_points"] == 41

    def test_unreached_distances_are_skipped(self):
        r = np.arange(0, 10)
        t = np.linspace(0.0, 1.0, 11)
        values = np.where(r[:, None] <= 5.0 * t[None, :], 1.0, 0.0)
        values[r > 4] = 0.0
        points = activation_times(_field(r, t, values))
        assert points[:, 0].tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]

    def test_exact_line(self):
        t = np.array([1.0, 2.0, 3.0, 4.0])
        fit = fit_velocity(np.column_stack([1.3 * t + 0.5, t]))
        assert np.isclose(fit.velocity, 1.3)
        assert np.isclose(fit.intercept, 0.5)
        assert fit.rms < 1e-12
        assert list(fit.points_frame().columns) == ["label", "R", "t"]

    def test_degenerate_inputs(self, step_front):
        with pytest.raises(DomainError):
            fit_velocity([[0.0, 1.0], [1.0, 2.0]])
        with pytest.raises(DomainError):
            fit_velocity([[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]])
        with pytest.raises(DomainError):
            activation_times(step_front, 1.5)
        with pytest.raises(DomainError):
            activation_times(_field([0, 1, 2], [0.0, 1.0], np.zeros((3, 2))))


class TestRidges:
    """Extrema followed through time."""

    def test_crest_velocity(self, travelling_wave):
        fits = track_extrema(travelling_wave, ridge_count=4)
        assert len(fits) == 4
        for fit in fits:
            assert fit.n_points >= 50
            assert np.isclose(fit.velocity, -1.0 / WAVE_NUMBER, atol=0.05)
        assert np.isclose(dominant_ridge(fits).velocity, -1.0 / WAVE_NUMBER, atol=0.05)

    def test_kinds_in_labels(self, travelling_wave):
        labels = [fit.label for fit in track_extrema(travelling_wave, ridge_count=6)]
        assert any(label.endswith("_max") for label in labels)
        assert any(label.endswith("_min") for label in labels)
        assert labels[0].startswith("ridge_0_")

    def test_extrema_before_activation_are_ignored(self):
        r = np.arange(0, 31)
        t = np.linspace(0.0, 10.0, 101)
        values = np.cos(t[None, :] + WAVE_NUMBER * r[:, None])
        values[r > 15] *= 1e-6
        fits = track_extrema(_field(r, t, values), ridge_count=10, threshold_fraction=1e-3)
        for fit in fits:
            assert np.all(fit.points[:, 0] <= 16.0)

    def test_dominant_prefers_smallest_residual(self):
        def fit(n, rms):
            return EdgeFit(points=np.zeros((n, 2)), velocity=-5.0, intercept=0.0, rms=rms)

        fits = [fit(10, 0.5), fit(6, 0.1), fit(3, 0.01)]
        assert dominant_ridge(fits) is fits[1]
        with pytest.raises(DomainError):
            dominant_ridge([])


class TestSquareLattice:
    def test_radial_edge(self, expanding_disc):
        fit = radial_edge_2d(expanding_disc)
        assert fit.label == "radial"
        assert np.isclose(fit.velocity, 3.0, atol=0.1)

    @pytest.mark.parametrize("axis", [0, 1])
    def test_axis_edge(self, expanding_disc, axis):
        fit = axis_edge_2d(expanding_disc, axis=axis)
        assert np.isclose(fit.velocity, 3.0, atol=0.1)
        # |offset| 0..18 is reached by t = 6
        assert fit.n_points == 19

    def test_dimension_checks(self, expanding_disc, step_front):
        with pytest.raises(DomainError):
            radial_edge_2d(step_front)
        with pytest.raises(DomainError):
            activation_times(expanding_disc)
        with pytest.raises(DomainError):
            axis_edge_2d(expanding_disc, axis=2)

    def test_radial_profile_averages_shells(self):
        distances = [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0)]
        field = _field(distances, [0.0], [[1.0], [2.0], [-4.0], [6.0], [3.0]])
        profile = radial_profile(field)
        # sqrt(2) rounds into the |R| = 1 shell
        assert profile.distances[:, 0].tolist() == [0, 1, 2]
        assert np.allclose(profile.values[:, 0], [1.0, 4.0, 3.0])

    def test_axis_profile_folds_signs(self, expanding_disc):
        profile = axis_profile(expanding_disc, axis=1)
        assert profile.kind == "axis_y"
        assert profile.distances[:, 0].tolist() == list(range(21))

    @pytest.mark.parametrize("edge", [radial_edge_2d, axis_edge_2d])
    def test_windowed_edge(self, expanding_disc, edge):
        fit = edge(expanding_disc, r_window=(5, 12))
        assert fit.n_points == 8
        assert fit.points[:, 0].min() == 5.0 and fit.points[:, 0].max() == 12.0
        assert np.isclose(fit.velocity, 3.0, atol=0.15)


class TestFitWindow:
    """Distance windows and the stability of the edge inside them."""

    def test_window_selection(self, step_front):
        assert window_field(step_front, None) is step_front
        windowed = window_field(step_front, (8, 20))
        assert windowed.distances[:, 0].tolist() == list(range(8, 21))
        assert windowed.values.shape == (13, len(step_front.times))

    @pytest.mark.parametrize("window", [(12, 5), (100, 200)])
    def test_bad_windows(self, step_front, window):
        with pytest.raises(DomainError):
            window_field(step_front, window)

    @pytest.mark.parametrize("shift", [-2, 0, 2])
    def test_velocity_stable_under_window_shift(self, tailed_front, shift):
        r_min, r_max = Config.CHAIN_FIT_WINDOW
        fit = profile_edge(tailed_front, r_window=(r_min + shift, r_max + shift))
        assert fit.n_points == r_max - r_min + 1
        assert np.isclose(fit.velocity, 1.5, atol=0.01)

    def test_velocity_insensitive_to_threshold(self, tailed_front):
        velocities = [
            profile_edge(tailed_front, threshold, Config.CHAIN_FIT_WINDOW).velocity for threshold in (5e-4, 1e-3, 5e-3)
        ]
        assert np.allclose(velocities, 1.5, atol=0.01)
        assert max(velocities) - min(velocities) <= 0.01
