import math

import numpy as np
import pytest
from scipy import special

from chiralfv.analytic import (
    ConvergenceError,
    TravelingWaveProfile,
    VonMisesState,
    bessel_ratio,
    hydrodynamic_r_near_transition,
    r_decay_threshold,
    solve_sce,
    transition_d_phi,
    traveling_wave_profile,
    uniform_density,
    von_mises,
)
from chiralfv.core import InvalidStateError, ModelParams

# frozen oracle values (independent quadrature + Newton, cross-checked with
# scipy.special and mpmath)
VON_MISES_R_D01 = 0.945542186423298
SCE_ROOTS = {
    # (alpha, d_phi): (R, v)
    (1.0, 0.1): (0.8022388379, -0.6358627570),
    (0.5, 0.1): (0.9343700352, -0.4190295387),
    (0.5, 0.2): (0.8303173325, -0.3493763338),
    (0.5, 0.3): (0.6675117694, -0.2913087870),
    (0.5, 0.4): (0.3737780438, -0.2512286833),
    (1.0, 0.2): (0.4990364087, -0.4877712467),
}


def params_for(alpha, d_phi, sigma=1.0):
    return ModelParams(v0=0.0, sigma=sigma, alpha=alpha, d_phi=d_phi, rho=0.25)


class TestBesselRatio:
    def test_zero(self):
        assert bessel_ratio(0.0) == 0.0

    def test_large_kappa_asymptote(self):
        kappa = 100.0
        assert bessel_ratio(kappa) == pytest.approx(1.0 - 1.0 / (2.0 * kappa), abs=1e-3)

    @pytest.mark.parametrize("kappa", [0.05, 0.5, 1.0, 3.0, 9.455, 40.0, 300.0, 2.0e4])
    def test_against_scipy(self, kappa):
        reference = special.i1e(kappa) / special.i0e(kappa)
        assert bessel_ratio(kappa) == pytest.approx(reference, rel=1e-10)

    def test_monotone(self):
        grid = np.linspace(0.0, 30.0, 40)
        values = [bessel_ratio(k) for k in grid]
        assert np.all(np.diff(values) > 0.0)

    def test_rejects_negative(self):
        with pytest.raises(InvalidStateError):
            bessel_ratio(-1.0)


class TestVonMises:
    def test_disordered_branch(self):
        assert von_mises(0.0, params_for(0.0, 0.5)).r_mag == 0.0
        assert von_mises(0.0, params_for(0.0, 0.7)).r_mag == 0.0

    def test_self_consistent_magnitude(self):
        state = von_mises(math.pi, params_for(0.0, 0.1))
        assert state.r_mag == pytest.approx(VON_MISES_R_D01, abs=1e-12)

    def test_normalization_and_mean(self):
        state = von_mises(1.0, params_for(0.0, 0.25))
        phi = np.linspace(0.0, 2.0 * math.pi, 100_001)
        density = state(phi)
        assert np.trapezoid(density, phi) == pytest.approx(1.0, abs=1e-10)
        assert phi[np.argmax(density)] == pytest.approx(1.0, abs=1e-3)

    def test_uniform_density_value(self):
        assert uniform_density() == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-15)


class TestTravelingWaveProfile:
    def test_zero_lag_reduces_to_von_mises(self):
        params = params_for(0.0, 0.1)
        state = von_mises(0.0, params)
        profile = traveling_wave_profile(state.r_mag, 0.0, params)
        phi = np.linspace(0.0, 2.0 * math.pi, 5001)
        assert np.max(np.abs(profile(phi) - state(phi))) < 1e-12

    def test_periodicity_at_endpoints(self):
        profile = traveling_wave_profile(0.6, -0.4, params_for(1.0, 0.1))
        assert profile(0.0) == pytest.approx(profile(2.0 * math.pi), rel=1e-12)

    def test_normalized_and_nonnegative(self):
        profile = traveling_wave_profile(0.8, -0.63, params_for(1.0, 0.1))
        phi = np.linspace(0.0, 2.0 * math.pi, 20001)
        g = profile(phi)
        assert np.min(g) >= 0.0
        assert np.trapezoid(g, phi) == pytest.approx(1.0, abs=1e-9)

    def test_skewed_for_nonzero_lag(self):
        params = params_for(1.0, 0.1)
        root = SCE_ROOTS[(1.0, 0.1)]
        profile = traveling_wave_profile(root[0], root[1], params)
        phi = np.linspace(0.0, 2.0 * math.pi, 40001)
        g = profile(phi)
        mean = math.atan2(np.trapezoid(g * np.sin(phi), phi),
                          np.trapezoid(g * np.cos(phi), phi))
        third_moment = np.trapezoid(g * np.sin(3.0 * (phi - mean)), phi)
        assert abs(third_moment) > 1e-3

    def test_extreme_exponents_stay_finite(self):
        # sigma R / d_phi ~ 107 and |v|/d_phi ~ 67: raw exponentials overflow,
        # the log-space evaluation must not
        params = params_for(1.45, 0.0075)
        profile = traveling_wave_profile(0.8, -0.5, params)
        phi = np.linspace(0.0, 2.0 * math.pi, 4001)
        g = profile(phi)
        assert np.all(np.isfinite(g))
        assert np.trapezoid(g, phi) == pytest.approx(1.0, abs=1e-8)


class TestSolveSCE:
    def test_zero_lag_matches_von_mises(self):
        params = params_for(0.0, 0.1)
        solution = solve_sce(params)
        assert abs(solution.v_wave) < 1e-8
        assert solution.r_mag == pytest.approx(VON_MISES_R_D01, abs=1e-8)

    @pytest.mark.parametrize("key", sorted(SCE_ROOTS))
    def test_frozen_roots(self, key):
        alpha, d_phi = key
        solution = solve_sce(params_for(alpha, d_phi))
        r_ref, v_ref = SCE_ROOTS[key]
        assert solution.r_mag == pytest.approx(r_ref, abs=5e-6)
        assert solution.v_wave == pytest.approx(v_ref, abs=5e-6)
        assert solution.residual <= 1e-10

    def test_residuals_quadrature_independent(self):
        solution = solve_sce(params_for(1.0, 0.1))
        profile = solution.profile
        refined = TravelingWaveProfile(solution.r_mag, solution.v_wave,
                                       solution.params,
                                       n_panels=2 * profile.n_panels)
        assert max(abs(r) for r in refined.sce_residuals()) <= 1e-8

    def test_mirror_symmetry_in_alpha(self):
        plus = solve_sce(params_for(0.8, 0.15))
        minus = solve_sce(params_for(-0.8, 0.15))
        assert plus.r_mag == pytest.approx(minus.r_mag, abs=1e-8)
        assert plus.v_wave == pytest.approx(-minus.v_wave, abs=1e-8)

    def test_r_nonincreasing_in_diffusion(self):
        magnitudes = [solve_sce(params_for(0.5, d)).r_mag for d in (0.1, 0.2, 0.3, 0.4)]
        assert all(a > b for a, b in zip(magnitudes, magnitudes[1:]))

    def test_disordered_root_reported(self):
        solution = solve_sce(params_for(1.0, 0.45), initial_guess=(0.05, -0.42))
        assert solution.disordered
        assert solution.r_mag == 0.0
        assert math.isnan(solution.v_wave)
        phi = np.linspace(0.0, 2.0 * math.pi, 101)
        np.testing.assert_allclose(solution.profile(phi), uniform_density(), rtol=1e-14)

    def test_critical_velocity_near_transition(self):
        alpha = 0.5
        params = params_for(alpha, transition_d_phi(params_for(alpha, 0.1)) - 1e-4)
        vcrit = -0.5 * math.sin(alpha)
        seed = (hydrodynamic_r_near_transition(params, vcrit), vcrit)
        solution = solve_sce(params, initial_guess=seed)
        assert solution.v_wave == pytest.approx(vcrit, abs=1e-3)


class TestClosedForms:
    def test_hydrodynamic_formula_arithmetic(self):
        params = params_for(0.0, 0.45)
        assert hydrodynamic_r_near_transition(params, 0.0) == pytest.approx(
            math.sqrt(0.18), rel=1e-12)

    def test_hydrodynamic_zero_on_transition_line(self):
        d = 0.5 * math.cos(1.0)
        assert hydrodynamic_r_near_transition(params_for(1.0, d), -0.4) == 0.0
        assert hydrodynamic_r_near_transition(params_for(1.0, d + 0.05), -0.4) == 0.0

    def test_hydrodynamic_agrees_with_sce_near_line(self):
        alpha = 0.5
        d_line = transition_d_phi(params_for(alpha, 0.1))
        params = params_for(alpha, d_line - 0.02)
        vcrit = -0.5 * math.sin(alpha)
        solution = solve_sce(params, initial_guess=(0.2, vcrit))
        approx = hydrodynamic_r_near_transition(params, solution.v_wave)
        assert approx == pytest.approx(solution.r_mag, rel=0.15)

    def test_decay_threshold_values(self):
        assert r_decay_threshold(params_for(0.0, 0.1)) == pytest.approx(1.0, rel=1e-14)
        assert r_decay_threshold(params_for(0.5 * math.pi, 0.1)) == pytest.approx(
            0.5, abs=1e-12)
        assert r_decay_threshold(params_for(1.0, 0.1)) == pytest.approx(
            math.cos(1.0) + 0.5 * math.sin(1.0), rel=1e-14)

    def test_decay_threshold_domain(self):
        with pytest.raises(InvalidStateError):
            r_decay_threshold(params_for(0.6 * math.pi, 0.1))
