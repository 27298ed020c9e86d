import numpy as np
import pytest
from pydantic import ValidationError

from nh_spinwave.backend.exception.custom_exception import DomainError
from nh_spinwave.backend.lattice import bosonic_coeffs, coeffs_over_grid, fermionic_coeffs, make_kgrid
from nh_spinwave.backend.models import Flavor, ModelParams


class TestKGrid:
    """Ordering and pairing of the momentum grid."""

    def test_chain_of_four(self):
        grid = make_kgrid(ModelParams(n_sites=4))
        assert grid.indices[:, 0].tolist() == [-2, -1, 0, 1]
        assert np.allclose(grid.points[:, 0], [-np.pi, -np.pi / 2, 0.0, np.pi / 2])
        assert grid.neg_index.tolist() == [0, 3, 2, 1]
        assert grid.representatives.tolist() == [0, 1, 2]

    def test_zone_edge_is_self_paired(self):
        grid = make_kgrid(ModelParams(n_sites=200))
        assert grid.points[0, 0] == -np.pi
        assert grid.neg_index[0] == 0

    @pytest.mark.parametrize("n_sites", [4, 6, 10])
    def test_square_is_lexicographic(self, n_sites):
        grid = make_kgrid(ModelParams(dimension=2, n_sites=n_sites))
        assert len(grid) == n_sites**2
        # last axis varies fastest
        assert grid.indices[1].tolist() == [-n_sites // 2, -n_sites // 2 + 1]
        assert grid.flat_index([0, 0]) == (n_sites // 2) * n_sites + n_sites // 2
        assert np.allclose(grid.points[grid.flat_index([0, 0])], [0.0, 0.0])

    def test_negation_is_an_involution(self):
        grid = make_kgrid(ModelParams(dimension=2, n_sites=6))
        assert np.array_equal(grid.neg_index[grid.neg_index], np.arange(len(grid)))
        reflected = grid.points[grid.neg_index]
        edge = np.isclose(grid.points, -np.pi)
        assert np.allclose(np.where(edge, -np.pi, -grid.points), reflected)

    def test_flat_index_rejects_off_grid_labels(self):
        grid = make_kgrid(ModelParams(n_sites=4))
        with pytest.raises(DomainError):
            grid.flat_index([2])

    def test_odd_sites_rejected(self):
        with pytest.raises(ValidationError):
            ModelParams(n_sites=7)


class TestCoefficients:
    """Bosonic and Jordan-Wigner coefficients at known momenta."""

    def test_bosonic_chain_at_zero(self, chain):
        coeffs = bosonic_coeffs(chain, 0.0)
        assert np.isclose(complex(coeffs.a), 5.5 + 0.2j)
        assert np.isclose(complex(coeffs.b), 0.5)

    def test_bosonic_square_sums_cosines(self):
        params = ModelParams(J=1.0, h=5.0, gamma=0.3, dimension=2, n_sites=4)
        coeffs = bosonic_coeffs(params, [0.0, np.pi])
        assert np.isclose(complex(coeffs.a), 5.0 + 0.3j)
        assert np.isclose(complex(coeffs.b), 0.0)

    def test_fermionic_at_quarter_zone(self, chain):
        coeffs = fermionic_coeffs(chain, np.pi / 2)
        assert np.isclose(complex(coeffs.a), 2.5 + 0.1j)
        assert np.isclose(complex(coeffs.b), -0.25j)

    def test_fermionic_needs_a_chain(self, small_square):
        with pytest.raises(DomainError):
            fermionic_coeffs(small_square, [0.0, 0.0])

    def test_momentum_width_checked(self, small_square):
        with pytest.raises(DomainError):
            bosonic_coeffs(small_square, [0.0, 0.0, 0.0])

    def test_grid_broadcast(self, small_chain):
        grid = make_kgrid(small_chain)
        coeffs = coeffs_over_grid(Flavor.FERMIONIC, small_chain, grid)
        assert np.shape(coeffs.a) == (len(grid),)
        assert np.allclose(np.asarray(coeffs.b).real, 0.0)
