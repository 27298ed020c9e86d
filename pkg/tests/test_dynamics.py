import math

import numpy as np
import pytest

from nh_spinwave.backend.config import Config
from nh_spinwave.backend.dynamics import (
    ModeState,
    Trajectory,
    eom_rhs,
    initial_conditions,
    integrate,
    logistic_blowup_time,
    propagate_modes,
    purity_defect,
    single_site_exact,
)
from nh_spinwave.backend.exception.custom_exception import DomainError
from nh_spinwave.backend.lattice import bosonic_coeffs, coeffs_over_grid, make_kgrid
from nh_spinwave.backend.models import Flavor, ModelParams, QuenchSpec

G0_SINGLE_SITE = 2.079e-3


def _quench(flavor, post, t_end, steps, workers=1, cap=Config.DIVERGENCE_CAP):
    spec = QuenchSpec.from_post(post, t_end=t_end, steps=steps)
    grid = make_kgrid(post)
    init = initial_conditions(flavor, spec.pre, grid)
    return integrate(flavor, spec, init, grid, workers=workers, cap=cap)


class TestInitialConditions:
    """Pre-quench ground-state correlators."""

    def test_bosonic_zero_mode(self, chain):
        grid = make_kgrid(chain)
        state = initial_conditions(Flavor.BOSONIC, chain.hermitian(), grid)
        i = grid.flat_index([0])
        assert np.isclose(state.g[i].real, 2.079e-3, rtol=1e-3)
        assert np.isclose(state.f[i].real, -4.5643e-2, rtol=1e-4)
        assert state.f[i].imag == 0.0

    def test_fermionic_quarter_zone(self, chain):
        grid = make_kgrid(chain)
        state = initial_conditions(Flavor.FERMIONIC, chain.hermitian(), grid)
        i = grid.flat_index([chain.n_sites // 4])
        assert np.isclose(grid.points[i, 0], np.pi / 2)
        assert np.isclose(state.g[i].real, 2.481e-3, rtol=1e-3)
        assert np.isclose(state.f[i], -0.049752j, atol=1e-6)

    @pytest.mark.parametrize("flavor", list(Flavor))
    def test_initial_states_are_pure(self, chain, flavor):
        grid = make_kgrid(chain)
        state = initial_conditions(flavor, chain.hermitian(), grid)
        assert np.max(np.abs(purity_defect(flavor, state))) < 1e-14

    def test_unstable_vacuum_rejected(self):
        params = ModelParams(J=1.0, h=0.4, n_sites=8)
        with pytest.raises(DomainError):
            initial_conditions(Flavor.BOSONIC, params, make_kgrid(params))

    def test_dissipative_pre_quench_rejected(self, small_chain):
        with pytest.raises(DomainError):
            initial_conditions(Flavor.BOSONIC, small_chain, make_kgrid(small_chain))


class TestClosedForms:
    def test_logistic_blowup(self):
        assert np.isclose(logistic_blowup_time(G0_SINGLE_SITE, 0.2), 15.45, atol=0.01)
        assert logistic_blowup_time(G0_SINGLE_SITE, -0.2) == math.inf
        assert logistic_blowup_time(0.0, 0.2) == math.inf

    def test_single_site_population(self):
        pb = 2.481e-3
        value = single_site_exact(0.2, math.sqrt(1.0 - pb), math.sqrt(pb), 5.0)
        assert np.isclose(value, 1.803e-2, atol=5e-5)
        assert np.isclose(single_site_exact(0.2, math.sqrt(1.0 - pb), math.sqrt(pb), 0.0), pb)

    def test_single_site_needs_normalised_amplitudes(self):
        with pytest.raises(DomainError):
            single_site_exact(0.2, 1.0, 1.0, 1.0)

    def test_scalar_right_hand_side(self, chain):
        coeffs = bosonic_coeffs(chain, 0.0)
        rate = eom_rhs(Flavor.BOSONIC, coeffs, ModeState(f=0.0, g=0.0))
        assert isinstance(rate.f, complex)
        assert np.isclose(rate.f, -0.5j)
        assert np.isclose(rate.g, 0.0)


class TestPropagation:
    """Fixed-step RK4 on independent modes."""

    def test_single_site_blowup_is_caught(self):
        a, b = 5.0 + 0.2j, 0.0
        times = np.linspace(0.0, 20.0, 201)
        f, g, report = propagate_modes(Flavor.BOSONIC, a, b, 0.0, G0_SINGLE_SITE, times)
        assert report is not None
        assert report.mode_index == 0
        assert report.bracket[0] <= report.time_estimate <= report.bracket[1]
        assert abs(report.time_estimate - logistic_blowup_time(G0_SINGLE_SITE, 0.2)) < 0.01
        assert report.last_sample_time == times[len(g) - 1]
        assert np.all(np.abs(g) <= Config.DIVERGENCE_CAP)

    def test_fourth_order_convergence(self, chain):
        coeffs = bosonic_coeffs(chain, 0.0)
        times = np.linspace(0.0, 2.0, 11)
        f0, g0 = -4.5643e-2, 2.079e-3

        def final(dt):
            f, g, _ = propagate_modes(Flavor.BOSONIC, coeffs.a, coeffs.b, f0, g0, times, dt=dt)
            return np.concatenate([f[-1], g[-1]])

        reference = final(0.00125)
        coarse = np.max(np.abs(final(0.01) - reference))
        fine = np.max(np.abs(final(0.005) - reference))
        assert 10.0 < coarse / fine < 20.0

    def test_samples_land_on_requested_times(self):
        times = np.array([0.0, 0.3, 0.35, 1.0])
        f, g, report = propagate_modes(Flavor.BOSONIC, 5.0 + 0.2j, 0.5, 0.0, 0.0, times, dt=0.1)
        assert report is None
        assert f.shape == (4, 1) and g.shape == (4, 1)


class TestIntegrate:
    """Whole-grid integration after the quench."""

    @pytest.mark.parametrize("flavor", list(Flavor))
    def test_purity_is_conserved(self, small_chain, flavor):
        traj = _quench(flavor, small_chain, t_end=5.0, steps=51)
        assert traj.divergence is None
        for state in traj.states:
            defect = np.abs(purity_defect(flavor, state))
            assert np.all(defect <= 1e-8 * (1.0 + np.abs(state.f) ** 2))

    def test_fermionic_occupations_stay_physical(self, small_chain):
        traj = _quench(Flavor.FERMIONIC, small_chain, t_end=13.0, steps=131)
        assert traj.divergence is None
        assert np.all(traj.g.real >= -1e-12)
        assert np.all(traj.g.real <= 1.0 + 1e-12)

    @pytest.mark.parametrize("flavor, parity", [(Flavor.BOSONIC, 1.0), (Flavor.FERMIONIC, -1.0)])
    def test_momentum_parity(self, small_chain, flavor, parity):
        traj = _quench(flavor, small_chain, t_end=2.0, steps=21)
        neg = traj.grid.neg_index
        paired = neg != np.arange(len(traj.grid))
        assert np.array_equal(traj.g[:, neg][:, paired], traj.g[:, paired])
        assert np.array_equal(traj.f[:, neg][:, paired], parity * traj.f[:, paired])

    @pytest.mark.parametrize("flavor", list(Flavor))
    @pytest.mark.parametrize("lattice", ["small_chain", "small_square"])
    def test_mirroring_matches_full_grid(self, request, flavor, lattice):
        params = request.getfixturevalue(lattice)
        spec = QuenchSpec.from_post(params, t_end=3.0, steps=31)
        grid = make_kgrid(params)
        init = initial_conditions(flavor, spec.pre, grid)
        traj = integrate(flavor, spec, init, grid, workers=1)

        coeffs = coeffs_over_grid(flavor, params, grid)
        a = np.broadcast_to(np.asarray(coeffs.a, dtype=complex), (len(grid),))
        b = np.broadcast_to(np.asarray(coeffs.b, dtype=complex), (len(grid),))
        f, g, report = propagate_modes(flavor, a, b, init.f, init.g, spec.times, spec.dt)
        assert report is None and traj.divergence is None
        assert np.allclose(traj.f, f, rtol=0.0, atol=1e-10)
        assert np.allclose(traj.g, g, rtol=0.0, atol=1e-10)

    def test_divergence_truncates_the_run(self, small_chain):
        traj = _quench(Flavor.BOSONIC, small_chain, t_end=30.0, steps=301)
        assert traj.divergence is not None
        assert traj.divergence.time_estimate < 30.0
        assert traj.times[-1] <= traj.divergence.bracket[0]
        assert traj.f.shape == traj.g.shape == (len(traj.times), len(traj.grid))

    def test_negative_gamma_stays_bounded(self, small_chain):
        traj = _quench(Flavor.BOSONIC, small_chain.with_gamma(-0.2), t_end=30.0, steps=301)
        assert traj.divergence is None
        assert np.all(np.isfinite(traj.g))

    def test_worker_count_does_not_change_results(self, small_chain, monkeypatch):
        monkeypatch.setattr(Config, "CHUNK_MODES", 4)
        runs = [_quench(Flavor.BOSONIC, small_chain, t_end=3.0, steps=31, workers=w) for w in (1, 2)]
        assert np.array_equal(runs[0].f, runs[1].f)
        assert np.array_equal(runs[0].g, runs[1].g)

    def test_table_round_trip(self, small_chain):
        traj = _quench(Flavor.FERMIONIC, small_chain, t_end=1.0, steps=11)
        frame = traj.to_frame()
        assert list(frame.columns) == ["t", "k_index", "Re_F", "Im_F", "Re_G", "Im_G"]
        assert len(frame) == 11 * 16
        back = Trajectory.from_frame(frame, Flavor.FERMIONIC, small_chain, traj.grid)
        assert np.array_equal(back.f, traj.f)
        assert np.array_equal(back.g, traj.g)

    def test_truncated_table_rejected(self, small_chain):
        traj = _quench(Flavor.BOSONIC, small_chain, t_end=1.0, steps=11)
        with pytest.raises(DomainError):
            Trajectory.from_frame(traj.to_frame().iloc[:-1], Flavor.BOSONIC, small_chain, traj.grid)

    def test_quench_spec_checks(self, small_chain):
        with pytest.raises(ValueError):
            QuenchSpec(pre=small_chain, post=small_chain, t_end=1.0)
        with pytest.raises(ValueError):
            QuenchSpec.from_post(small_chain, t_end=1.0, steps=11, dt=0.5)
        with pytest.raises(ValueError):
            QuenchSpec.from_post(small_chain.model_copy(update={"gamma_prime": 0.1}), t_end=1.0)
