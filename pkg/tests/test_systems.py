import math

import numpy as np
import pytest

from frictionlab.friction import GROUND_TRUTH, lugre_force, lugre_zdot
from frictionlab.numerics import resample
from frictionlab.systems import (
    PoBParams,
    PoBState,
    SDoBParams,
    SDoBState,
    friction_from_eom,
    normal_force_estimate,
    pob_dynamics,
    pob_friction_terms,
    pob_solve_accel,
    sdob_dynamics,
    sdob_normal_force,
    simulate_pob,
    simulate_sdob,
    would_be_acceleration,
)

P = PoBParams()
GT = GROUND_TRUTH


class TestPoBParams:
    def test_defaults_match_reference_values(self):
        assert (P.m_b, P.m_l, P.length, P.d, P.j_l) == (0.5, 1.0, 0.5, 0.25, 0.042)
        assert P.g == 9.81

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            PoBParams(m_b=0)

    def test_state_round_trip(self):
        st = PoBState(0.1, 0.2, 0.3, 0.4, 1e-5)
        assert PoBState.from_array(st.as_array()) == st


class TestNormalForceEstimate:
    def test_at_rest_equals_minus_weight(self):
        assert normal_force_estimate(0.0, 0.0, P) == pytest.approx(-14.715)

    def test_contact_break_boundary(self):
        thetadot = math.sqrt(58.86)
        assert normal_force_estimate(0.0, thetadot, P) == pytest.approx(0.0, abs=1e-9)

    def test_horizontal_link_insensitive_to_spin(self):
        assert normal_force_estimate(math.pi / 2, 5.0, P) == pytest.approx(-14.715)

    def test_sign_invariant(self):
        # below the unload boundary the estimate stays negative
        for theta in np.linspace(-1.2, 1.2, 7):
            for thetadot in np.linspace(-7, 7, 9):
                if P.m_l * P.d * thetadot**2 * math.cos(theta) <= (P.m_b + P.m_l) * P.g:
                    assert normal_force_estimate(theta, thetadot, P) <= 0


class TestWouldBeAcceleration:
    def test_centripetal_only(self):
        assert would_be_acceleration(math.pi / 2, 1.0, 0.0, P) == pytest.approx(1 / 6)

    def test_angular_only(self):
        assert would_be_acceleration(0.0, 0.0, 1.0, P) == pytest.approx(-1 / 6)

    def test_static(self):
        assert would_be_acceleration(0.7, 0.0, 0.0, P) == 0.0


class TestFrictionFromEom:
    def test_all_zero(self):
        assert friction_from_eom(0.0, 0.0, 0.0, 0.0, P) == 0.0

    def test_pure_box_acceleration(self):
        assert friction_from_eom(1.0, 0.0, 0.0, 0.0, P) == pytest.approx(-1.5)

    def test_round_trip_with_dynamics(self):
        state = np.array([0.0, 0.15, 0.4, -2.0, 2e-5])
        tau = 1.3
        _, _, f_f = pob_friction_terms(state, P, GT)
        deriv = pob_dynamics(state, tau, P, GT)
        recovered = friction_from_eom(deriv[1], state[2], state[3], deriv[3], P)
        assert recovered == pytest.approx(f_f, abs=1e-10)


class TestPoBDynamics:
    def test_equilibrium_upright(self):
        deriv = pob_dynamics(np.zeros(5), 0.0, P, GT)
        np.testing.assert_array_equal(deriv, 0.0)

    def test_horizontal_link_decouples(self):
        deriv = pob_dynamics(np.array([0, 0, math.pi / 2, 0, 0]), 0.0, P, GT)
        assert deriv[3] == pytest.approx(0.25 * 9.81 / 0.1045, rel=1e-6)
        assert deriv[1] == pytest.approx(0.0, abs=1e-12)

    def test_mass_matrix_determinant(self):
        det = (P.m_b + P.m_l) * (P.j_l + P.m_l * P.d**2) - (P.m_l * P.d) ** 2
        assert det == pytest.approx(0.0943, abs=1e-4)
        # solver agrees with the closed 2x2 inverse
        a, b = pob_solve_accel(0.0, 0.0, 1.0, 0.0, P)
        assert b == pytest.approx((P.m_b + P.m_l) / det)

    def test_energy_balance_under_free_fall(self):
        # tau = 0: d/dt(T + V) = -F_f xdot_b
        sol = simulate_pob(
            lambda t, y: 0.0,
            [0, 1.0],
            P,
            GT,
            state0=[0, 0, 0.6, 0, 0],
            rel_tol=1e-10,
            abs_tol=1e-12,
        )
        ts, states = resample(sol, 8000)

        def energy(y):
            _, v, th, w, _ = y
            t_kin = (
                0.5 * (P.m_b + P.m_l) * v**2
                + P.m_l * P.d * w * v * math.cos(th)
                + 0.5 * (P.j_l + P.m_l * P.d**2) * w**2
            )
            return t_kin + P.m_l * P.g * P.d * math.cos(th)

        e = np.array([energy(y) for y in states])
        f_f = np.array([pob_friction_terms(y, P, GT)[2] for y in states])
        dissipated = np.trapezoid(f_f * states[:, 1], ts)
        assert dissipated >= 0  # friction dissipates on balance
        balance = (e[-1] - e[0]) + dissipated
        assert abs(balance) < 1e-5 * abs(e[0])


class TestSDoB:
    S = SDoBParams()

    def test_defaults_static_normal_force(self):
        assert sdob_normal_force(0.0, 0.0, self.S) == pytest.approx(14.715)

    def test_spring_unload(self):
        # y2 = 0.01 with k = 2000 gives y2ddot = -20, F_N clipped at zero
        deriv = sdob_dynamics(np.array([0, 0, 0.01, 0, 0]), 0.0, self.S, GT)
        assert deriv[3] == pytest.approx(-20.0)
        assert sdob_normal_force(0.01, 0.0, self.S) == 0.0  # 14.715 - 20 < 0

    def test_equilibrium(self):
        deriv = sdob_dynamics(np.zeros(5), 0.0, self.S, GT)
        np.testing.assert_array_equal(deriv, 0.0)

    def test_contact_free_limit_passes_through(self):
        state = np.array([0, 0.5, 0.01, 0, 1e-5])
        deriv = sdob_dynamics(state, 0.0, self.S, GT)
        assert deriv[4] == pytest.approx(0.5)  # zdot = v when F_N = 0

    def test_stiff_limit_is_constant_normal_force(self):
        stiff = SDoBParams(k=2e6, c=2e4)
        sol = simulate_sdob(lambda t: 10.0 * t, [0, 0.5], stiff, GT)
        _, states = resample(sol, 400)
        f_n = sdob_normal_force(states[:, 2], states[:, 3], stiff)
        np.testing.assert_allclose(f_n, 14.715, rtol=1e-6)

    def test_state_round_trip(self):
        st = SDoBState(0.1, 0.2, 0.01, -0.05, 1e-5)
        assert SDoBState.from_array(st.as_array()) == st

    def test_pull_produces_slip_and_varying_normal_force(self):
        sol = simulate_sdob(
            lambda t: min(10.0, 8.0 * t), [0, 1.5], self.S, GT, state0=[0, 0, 0.004, 0, 0]
        )
        _, states = resample(sol, 400)
        f_n = sdob_normal_force(states[:, 2], states[:, 3], self.S)
        assert states[-1, 0] > 0.01  # the box moved
        assert f_n.max() - f_n.min() > 5.0  # the spring modulated the load
