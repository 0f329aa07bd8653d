import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chiralfv.core import (
    Field1D,
    Field3D,
    Grid1D,
    Grid3D,
    InvalidStateError,
    ModelParams,
    periodic_center_distance_sq,
    total_mass,
    wrap,
)


class TestWrap:
    def test_examples(self):
        assert wrap(-1, 8) == 7
        assert wrap(8, 8) == 0
        assert wrap(3, 8) == 3

    def test_requires_positive_extent(self):
        with pytest.raises(InvalidStateError):
            wrap(0, 0)

    @given(st.integers(-10**9, 10**9), st.integers(1, 10**6))
    def test_periodic_and_idempotent(self, i, extent):
        assert wrap(i + extent, extent) == wrap(i, extent)
        wrapped = wrap(i, extent)
        assert 0 <= wrapped < extent
        assert wrap(wrapped, extent) == wrapped


class TestTotalMass:
    @pytest.mark.parametrize("l", [8, 64, 257])
    def test_uniform_density_has_unit_mass(self, l):
        field = Field1D(Grid1D(l), np.full(l, 1.0 / (2.0 * math.pi)))
        assert total_mass(field) == pytest.approx(1.0, abs=1e-14)

    def test_zero_field(self):
        assert total_mass(Field1D(Grid1D(16), np.zeros(16))) == 0.0

    def test_point_mass(self):
        grid = Grid1D(32)
        values = np.zeros(32)
        values[5] = 1.0 / grid.d_phi_cell
        assert total_mass(Field1D(grid, values)) == pytest.approx(1.0, abs=1e-15)

    def test_uniform_3d(self):
        grid = Grid3D(4, 6, 16)
        field = Field3D(grid, np.full((4, 6, 16), 1.0 / (2.0 * math.pi)))
        assert total_mass(field) == pytest.approx(1.0, abs=1e-14)

    def test_linearity(self):
        grid = Grid1D(48)
        rng = np.random.default_rng(3)
        f = rng.random(48)
        g = rng.random(48)
        lhs = total_mass(Field1D(grid, 2.5 * f + 0.3 * g))
        rhs = 2.5 * total_mass(Field1D(grid, f)) + 0.3 * total_mass(Field1D(grid, g))
        assert lhs == pytest.approx(rhs, rel=1e-14)


class TestPeriodicDistance:
    def test_same_cell(self):
        grid = Grid3D(10, 10, 4)
        assert periodic_center_distance_sq(3, 7, 3, 7, grid) == 0.0

    def test_adjacent_across_boundary(self):
        grid = Grid3D(10, 10, 4)
        assert periodic_center_distance_sq(0, 2, 9, 2, grid) == pytest.approx(0.01, abs=1e-15)

    def test_half_domain_diagonal(self):
        grid = Grid3D(4, 4, 4)
        assert periodic_center_distance_sq(0, 0, 2, 2, grid) == pytest.approx(0.5, abs=1e-15)

    @given(st.integers(0, 9), st.integers(0, 7), st.integers(0, 9), st.integers(0, 7))
    def test_symmetric_and_bounded(self, i, j, l, m):
        grid = Grid3D(10, 8, 4)
        d_ij = periodic_center_distance_sq(i, j, l, m, grid)
        d_ji = periodic_center_distance_sq(l, m, i, j, grid)
        assert d_ij == pytest.approx(d_ji, abs=1e-15)
        assert d_ij <= 0.5 + 1e-15


class TestValidation:
    def test_model_params_ranges(self):
        good = dict(v0=1.0, sigma=1.0, alpha=0.0, d_phi=0.1, rho=0.1)
        ModelParams(**good)
        for key, bad in [("sigma", 0.0), ("d_phi", -0.1), ("rho", 0.6),
                         ("rho", 0.0), ("alpha", 4.0), ("v0", -1.0),
                         ("sigma", math.nan)]:
            with pytest.raises(InvalidStateError):
                ModelParams(**{**good, key: bad})

    def test_field_shape_checks(self):
        with pytest.raises(InvalidStateError):
            Field1D(Grid1D(8), np.zeros(9))
        with pytest.raises(InvalidStateError):
            Field3D(Grid3D(2, 3, 4), np.zeros((2, 3, 5)))

    def test_grid_cell_sizes(self):
        grid = Grid3D(40, 50, 64)
        assert grid.dx == pytest.approx(1.0 / 40)
        assert grid.dy == pytest.approx(1.0 / 50)
        assert grid.d_phi_cell == pytest.approx(2.0 * math.pi / 64)
