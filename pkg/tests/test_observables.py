import math

import numpy as np
import pytest

from helpers import cell_averages_1d, lift_3d, random_density_3d
from chiralfv.analytic import von_mises
from chiralfv.core import Field1D, Field3D, Grid1D, Grid3D, InvalidStateError, ModelParams, total_mass
from chiralfv.homogeneous import cell_trig_weights
from chiralfv.kinetic import build_stencil
from chiralfv.observables import (
    free_energy,
    line_profile,
    localization_order,
    max_spatial_deviation,
    momentum_field,
    nonlocal_polar_field,
    polar_order,
    spatial_density,
)


def normalized(field):
    field.values /= total_mass(field)
    return field


class TestPolarOrder:
    def test_uniform_is_disordered(self):
        field = Field1D(Grid1D(64), np.full(64, 1.0 / (2.0 * math.pi)))
        assert polar_order(field).magnitude < 1e-14

    def test_point_mass(self):
        grid = Grid1D(32)
        values = np.zeros(32)
        k = 7
        values[k] = 1.0 / grid.d_phi_cell
        order = polar_order(Field1D(grid, values))
        w_avg, _ = cell_trig_weights(grid.d_phi_cell)
        assert order.magnitude == pytest.approx(w_avg, rel=1e-14)
        assert order.phase == pytest.approx(k * grid.d_phi_cell, rel=1e-12)

    def test_von_mises_magnitude_matches_self_consistent_value(self):
        params = ModelParams(v0=0.0, sigma=1.0, alpha=0.0, d_phi=0.1, rho=0.25)
        state = von_mises(2.0, params)
        field = cell_averages_1d(Grid1D(256), state)
        assert polar_order(field).magnitude == pytest.approx(state.r_mag, abs=1e-3)
        assert polar_order(field).phase == pytest.approx(2.0, abs=1e-6)

    def test_magnitude_bounded_for_normalized_fields(self):
        for seed in range(4):
            field = normalized(random_density_3d(Grid3D(5, 4, 32), seed))
            assert polar_order(field).magnitude <= 1.0 + 1e-12

    def test_3d_equals_1d_for_homogeneous(self):
        grid1 = Grid1D(48)
        profile = normalized(Field1D(grid1, np.random.default_rng(1).random(48) + 0.1))
        field3 = lift_3d(Grid3D(6, 5, 48), profile)
        o1 = polar_order(profile)
        o3 = polar_order(field3)
        assert o3.magnitude == pytest.approx(o1.magnitude, rel=1e-12)
        assert o3.phase == pytest.approx(o1.phase, rel=1e-12)


class TestNonlocalPolarField:
    def test_homogeneous_equals_global(self):
        grid = Grid3D(8, 8, 32)
        profile = normalized(Field1D(Grid1D(32), np.random.default_rng(2).random(32) + 0.1))
        field = lift_3d(grid, profile)
        stencil = build_stencil(grid, 0.2)
        local = nonlocal_polar_field(field, stencil)
        reference = polar_order(profile)
        np.testing.assert_allclose(local.magnitude, reference.magnitude, rtol=1e-12)
        np.testing.assert_allclose(local.phase, reference.phase, rtol=1e-10)

    def test_uniform_vanishes(self):
        grid = Grid3D(6, 6, 24)
        field = Field3D(grid, np.full((6, 6, 24), 1.0 / (2.0 * math.pi)))
        stencil = build_stencil(grid, 0.25)
        assert np.max(nonlocal_polar_field(field, stencil).magnitude) < 1e-13

    def test_synchronized_column_is_localized(self):
        grid = Grid3D(9, 9, 32)
        values = np.full((9, 9, 32), 1.0 / (2.0 * math.pi))
        values[4, 4, :] = 0.0
        values[4, 4, 3] = 1.0 / grid.d_phi_cell  # fully synchronized cell
        field = Field3D(grid, values)
        stencil = build_stencil(grid, 0.05)  # below the cell spacing 1/9
        assert len(stencil.offsets) == 1
        local = nonlocal_polar_field(field, stencil)
        w_avg, _ = cell_trig_weights(grid.d_phi_cell)
        assert local.magnitude[4, 4] == pytest.approx(w_avg, rel=1e-12)
        assert local.magnitude[0, 0] < 1e-13


class TestLocalization:
    def test_uniform_vanishes(self):
        grid = Grid3D(10, 10, 16)
        field = Field3D(grid, np.full((10, 10, 16), 1.0 / (2.0 * math.pi)))
        assert localization_order(field).magnitude < 1e-14

    def test_point_concentration(self):
        grid = Grid3D(12, 10, 16)
        values = np.zeros((12, 10, 16))
        values[3, 4, :] = 1.0 / (grid.dx * grid.dy * 2.0 * math.pi)
        order = localization_order(Field3D(grid, values))
        expected = (math.sin(math.pi * grid.dx) / (math.pi * grid.dx)) \
            * (math.sin(math.pi * grid.dy) / (math.pi * grid.dy))
        assert order.magnitude == pytest.approx(expected, rel=1e-12)

    def test_translation_covariance(self):
        grid = Grid3D(8, 8, 12)
        field = normalized(random_density_3d(grid, seed=7))
        base = localization_order(field)
        di, dj = 3, 5
        shifted = Field3D(grid, np.roll(field.values, (di, dj), axis=(0, 1)))
        moved = localization_order(shifted)
        assert moved.magnitude == pytest.approx(base.magnitude, rel=1e-12)
        expected_phase = base.phase + 2.0 * math.pi * (di * grid.dx + dj * grid.dy)
        wrapped = (moved.phase - expected_phase + math.pi) % (2.0 * math.pi) - math.pi
        assert abs(wrapped) < 1e-10


class TestProjections:
    def test_spatial_density_normalization(self):
        field = normalized(random_density_3d(Grid3D(7, 6, 20), seed=3))
        sd = spatial_density(field)
        assert np.sum(sd) * field.grid.dx * field.grid.dy == pytest.approx(1.0, rel=1e-13)

    def test_homogeneous_projection_is_unit(self):
        grid = Grid3D(5, 5, 24)
        field = Field3D(grid, np.full((5, 5, 24), 1.0 / (2.0 * math.pi)))
        np.testing.assert_allclose(spatial_density(field), 1.0, rtol=1e-13)

    def test_product_field_projects_exactly(self):
        grid = Grid3D(6, 4, 16)
        rng = np.random.default_rng(11)
        g_xy = rng.random((6, 4)) + 0.2
        h_phi = rng.random(16) + 0.1
        h_phi /= np.sum(h_phi) * grid.d_phi_cell
        field = Field3D(grid, g_xy[:, :, None] * h_phi[None, None, :])
        np.testing.assert_allclose(spatial_density(field), g_xy, rtol=1e-13)

    def test_momentum_of_uniform_vanishes(self):
        grid = Grid3D(5, 5, 32)
        field = Field3D(grid, np.full((5, 5, 32), 1.0 / (2.0 * math.pi)))
        assert np.max(np.abs(momentum_field(field))) < 1e-15

    def test_momentum_of_synchronized_flow(self):
        grid = Grid3D(4, 4, 64)
        values = np.zeros((4, 4, 64))
        values[:, :, 0] = 1.0 / (2.0 * math.pi * grid.d_phi_cell)
        field = Field3D(grid, values)
        u = momentum_field(field)
        sd = spatial_density(field)
        w_avg, _ = cell_trig_weights(grid.d_phi_cell)
        np.testing.assert_allclose(u[:, :, 0], sd * w_avg, rtol=1e-13)
        assert np.max(np.abs(u[:, :, 1])) < 1e-15

    def test_momentum_bounded_by_density(self):
        field = random_density_3d(Grid3D(6, 6, 24), seed=5)
        u = momentum_field(field)
        speed = np.hypot(u[:, :, 0], u[:, :, 1])
        assert np.all(speed <= spatial_density(field) * (1.0 + 1e-12))

    def test_projections_are_linear_in_the_field(self):
        grid = Grid3D(5, 4, 12)
        rng = np.random.default_rng(23)
        a = rng.random((5, 4, 12))
        b = rng.random((5, 4, 12))
        combo = Field3D(grid, 1.7 * a + 0.4 * b)
        for projection in (spatial_density, momentum_field):
            lhs = projection(combo)
            rhs = 1.7 * projection(Field3D(grid, a)) + 0.4 * projection(Field3D(grid, b))
            np.testing.assert_allclose(lhs, rhs, atol=1e-14)

    def test_momentum_consistent_with_polar_order(self):
        grid = Grid3D(6, 5, 24)
        field = normalized(random_density_3d(grid, seed=19))
        u = momentum_field(field)
        total = np.sum(u, axis=(0, 1)) * grid.dx * grid.dy
        order = polar_order(field)
        expected = order.magnitude * np.array([math.cos(order.phase), math.sin(order.phase)])
        np.testing.assert_allclose(total, expected, atol=1e-12)


class TestSpatialDeviation:
    def test_homogeneous_field(self):
        grid = Grid3D(8, 8, 16)
        profile = np.random.default_rng(4).random(16) + 0.1
        field = lift_3d(grid, Field1D(Grid1D(16), profile))
        assert max_spatial_deviation(field) < 1e-13 * np.max(profile)

    def test_single_perturbed_cell(self):
        grid = Grid3D(10, 10, 8)
        field = Field3D(grid, np.full((10, 10, 8), 0.5))
        eps = 1e-3
        field.values[2, 3, 1] += eps
        expected = eps * (1.0 - 1.0 / (grid.n * grid.m))
        assert max_spatial_deviation(field) == pytest.approx(expected, rel=1e-10)

    def test_invariant_under_angular_relabeling(self):
        field = random_density_3d(Grid3D(6, 6, 12), seed=8)
        rolled = Field3D(field.grid, np.roll(field.values, 4, axis=2))
        assert max_spatial_deviation(field) == pytest.approx(
            max_spatial_deviation(rolled), rel=1e-14)


class TestLineProfile:
    @staticmethod
    def synchronized_bump(grid, x0=0.5, y0=0.5, width=0.08):
        x = grid.x_centers()
        y = grid.y_centers()
        dx = x[:, None] - x0
        dx -= np.round(dx)
        dy = y[None, :] - y0
        dy -= np.round(dy)
        bump = 0.05 + np.exp(-(dx**2 + dy**2) / (2.0 * width**2))
        h = np.zeros(grid.l)
        h[0] = 1.0 / grid.d_phi_cell  # all momentum along +x
        return Field3D(grid, bump[:, :, None] * h[None, None, :]), bump

    def test_symmetric_bump_profile_second_order(self):
        errors = {}
        for n in (48, 96):
            grid = Grid3D(n, n, 16)
            field, _ = self.synchronized_bump(grid)
            profile = line_profile(field, samples=41)
            assert profile.phi_max == pytest.approx(0.0, abs=1e-12)
            assert profile.r_max == (pytest.approx(0.5, abs=grid.dx),
                                     pytest.approx(0.5, abs=grid.dy))
            x = 0.5 + profile.s
            expected = 0.05 + np.exp(-((x - 0.5) ** 2) / (2.0 * 0.08**2))
            errors[n] = np.max(np.abs(profile.values - expected))
        assert errors[48] < 1e-2
        assert errors[48] / errors[96] == pytest.approx(4.0, rel=0.5)

    def test_uniform_field_has_no_direction(self):
        grid = Grid3D(8, 8, 16)
        field = Field3D(grid, np.full((8, 8, 16), 1.0 / (2.0 * math.pi)))
        with pytest.raises(InvalidStateError):
            line_profile(field, samples=11)

    def test_asymmetric_density_gives_asymmetric_profile(self):
        grid = Grid3D(64, 64, 8)
        x = grid.x_centers()
        skewed = 0.05 + np.where(
            x[:, None] < 0.5,
            np.exp(-((x[:, None] - 0.5) / 0.05) ** 2),
            np.exp(-((x[:, None] - 0.5) / 0.15) ** 2),
        ) * np.exp(-((grid.y_centers()[None, :] - 0.5) / 0.1) ** 2)
        h = np.zeros(grid.l)
        h[0] = 1.0 / grid.d_phi_cell
        field = Field3D(grid, skewed[:, :, None] * h[None, None, :])
        profile = line_profile(field, samples=81)
        flipped = profile.values[::-1]
        assert np.max(np.abs(profile.values - flipped)) > 0.1

    def test_requires_two_samples(self):
        field = random_density_3d(Grid3D(6, 6, 8), seed=1)
        with pytest.raises(InvalidStateError):
            line_profile(field, samples=1)


class TestFreeEnergy:
    def params(self, d_phi=0.1):
        return ModelParams(v0=0.0, sigma=1.0, alpha=0.0, d_phi=d_phi, rho=0.25)

    def test_uniform_value(self):
        grid = Grid1D(64)
        field = Field1D(grid, np.full(64, 1.0 / (2.0 * math.pi)))
        expected = 0.1 * math.log(1.0 / (2.0 * math.pi))
        assert free_energy(field, self.params()) == pytest.approx(expected, rel=1e-12)

    def test_von_mises_below_uniform(self):
        params = self.params(0.1)
        state = von_mises(math.pi, params)
        grid = Grid1D(256)
        vm_energy = free_energy(cell_averages_1d(grid, state), params)
        uniform_energy = free_energy(
            Field1D(grid, np.full(256, 1.0 / (2.0 * math.pi))), params)
        assert vm_energy < uniform_energy

    def test_rejects_chiral_interaction(self):
        field = Field1D(Grid1D(16), np.full(16, 1.0 / (2.0 * math.pi)))
        chiral = ModelParams(v0=0.0, sigma=1.0, alpha=0.3, d_phi=0.1, rho=0.25)
        with pytest.raises(InvalidStateError):
            free_energy(field, chiral)
