import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frictionlab.friction import (
    GROUND_TRUTH,
    LuGreParams,
    coulomb_viscous_force,
    lugre_force,
    lugre_steady_state_force,
    lugre_steady_state_z,
    lugre_zdot,
    stribeck_g,
)
from frictionlab.numerics import integrate_rk45

GT = GROUND_TRUTH
WEIGHT = 14.715  # (m_b + m_L) g of the box system


class TestParams:
    def test_ground_truth_values(self):
        assert GT.sigma0 == 1.0e5
        assert GT.sigma1 == 316.23
        assert GT.sigma2 == 0.40
        assert GT.mu_c == 0.30
        assert GT.mu_s == 0.60
        assert GT.v_s == 1.0e-3
        assert GT.alpha == 2.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(sigma0=-1),
            dict(sigma1=0),
            dict(v_s=0),
            dict(mu_c=0.7),  # exceeds mu_s
            dict(mu_c=0),
            dict(alpha=1.0),
        ],
    )
    def test_invalid_params_rejected(self, kwargs):
        base = dict(sigma0=1e5, sigma1=316.23, sigma2=0.4, mu_c=0.3, mu_s=0.6, v_s=1e-3)
        base.update(kwargs)
        with pytest.raises(ValueError):
            LuGreParams(**base)

    def test_vector_round_trip(self):
        assert LuGreParams.from_vector(GT.as_vector()) == GT


class TestStribeck:
    def test_at_rest_static_level(self):
        assert stribeck_g(0.0, WEIGHT, GT) == pytest.approx(0.6 * WEIGHT)

    def test_fast_sliding_coulomb_level(self):
        assert stribeck_g(1.0, WEIGHT, GT) == pytest.approx(0.3 * WEIGHT, abs=1e-9)

    def test_at_stribeck_velocity(self):
        expected = 4.4145 + 4.4145 * np.e**-1
        assert stribeck_g(1e-3, WEIGHT, GT) == pytest.approx(expected, abs=1e-3)

    @given(
        v=st.floats(-10, 10),
        f_n=st.floats(-50, 50),
    )
    def test_bounds_and_even_symmetry(self, v, f_n):
        g = stribeck_g(v, f_n, GT)
        assert GT.mu_c * abs(f_n) - 1e-12 <= g <= GT.mu_s * abs(f_n) + 1e-12
        assert g == stribeck_g(-v, f_n, GT)

    @given(v=st.floats(0, 5))
    def test_monotone_non_increasing_in_speed(self, v):
        assert stribeck_g(v, WEIGHT, GT) >= stribeck_g(v * 1.5 + 1e-6, WEIGHT, GT)


class TestZdot:
    def test_zero_velocity(self):
        assert lugre_zdot(0.0, 1e-3, WEIGHT, GT) == 0.0

    def test_steady_state_is_fixed_point(self):
        z_ss = lugre_steady_state_z(1.0, WEIGHT, GT)
        assert z_ss == pytest.approx(4.4145e-5, rel=1e-4)
        assert abs(lugre_zdot(1.0, z_ss, WEIGHT, GT)) < 1e-9

    def test_zero_deflection(self):
        assert lugre_zdot(1.0, 0.0, WEIGHT, GT) == 1.0

    def test_contact_free_limit(self):
        assert lugre_zdot(0.7, 5e-5, 0.0, GT) == 0.7

    def test_steady_state_residual_on_velocity_grid(self):
        vs = np.concatenate([np.linspace(-1, -1e-4, 300), np.linspace(1e-4, 1, 300)])
        z_ss = lugre_steady_state_z(vs, WEIGHT, GT)
        resid = lugre_zdot(vs, z_ss, WEIGHT, GT)
        assert np.abs(resid).max() < 1e-12


class TestForce:
    def test_zero_state(self):
        assert lugre_force(0.0, 0.0, 0.0, GT) == 0.0

    def test_steady_sliding(self):
        z_ss = lugre_steady_state_z(1.0, WEIGHT, GT)
        assert lugre_force(z_ss, 0.0, 1.0, GT) == pytest.approx(4.8145, abs=1e-4)

    def test_pure_deflection(self):
        assert lugre_force(1e-4, 0.0, 0.0, GT) == pytest.approx(10.0)


class TestSteadyStateForce:
    def test_positive_velocity(self):
        assert lugre_steady_state_force(1.0, WEIGHT, GT) == pytest.approx(4.8145, abs=1e-4)

    def test_odd_symmetry(self):
        assert lugre_steady_state_force(-1.0, WEIGHT, GT) == pytest.approx(
            -lugre_steady_state_force(1.0, WEIGHT, GT)
        )

    def test_creep_approaches_static_level(self):
        assert lugre_steady_state_force(1e-6, WEIGHT, GT) == pytest.approx(8.829, abs=1e-3)

    def test_rest_maps_to_zero(self):
        assert lugre_steady_state_force(0.0, WEIGHT, GT) == 0.0

    @given(v=st.floats(1e-6, 5), f_n=st.floats(0.1, 50))
    def test_odd_in_v_everywhere(self, v, f_n):
        fwd = lugre_steady_state_force(v, f_n, GT)
        bwd = lugre_steady_state_force(-v, f_n, GT)
        assert fwd == pytest.approx(-bwd, rel=1e-12)


class TestCoulombViscous:
    def test_rest(self):
        assert coulomb_viscous_force(0.0, WEIGHT, 0.3, 0.4) == 0.0

    def test_sliding(self):
        assert coulomb_viscous_force(1.0, WEIGHT, 0.3, 0.4) == pytest.approx(4.8145)

    def test_odd(self):
        assert coulomb_viscous_force(-1.0, WEIGHT, 0.3, 0.4) == pytest.approx(-4.8145)


class TestBristleBoundInvariance:
    """|z| <= g(v)/sigma0 is forward-invariant under the state evolution."""

    @settings(max_examples=12, deadline=None)
    @given(st.integers(0, 10_000))
    def test_fuzzed_velocity_profiles(self, seed):
        rng = np.random.default_rng(seed)
        coeffs = rng.normal(0, 0.08, 4)
        freqs = rng.uniform(0.5, 6.0, 4)
        phases = rng.uniform(0, 2 * np.pi, 4)

        def v_of(t):
            return float(np.sum(coeffs * np.sin(2 * np.pi * freqs * t + phases)))

        bound = GT.mu_s * WEIGHT / GT.sigma0
        z0 = rng.uniform(-bound, bound)

        def rhs(t, y):
            return np.array([lugre_zdot(v_of(t), y[0], WEIGHT, GT)])

        sol = integrate_rk45(rhs, [z0], [0, 0.3], rel_tol=1e-8, abs_tol=1e-12)
        assert np.abs(sol.states).max() <= bound + 1e-8
