import numpy as np
import pytest

from frictionlab.numerics import (
    IntegrationError,
    StepSizeUnderflowError,
    finite_diff_central,
    integrate_rk45,
    resample,
)


def exp_decay(t, y):
    return -y


def oscillator(t, y):
    return np.array([y[1], -y[0]])


class TestIntegrateRk45:
    def test_exponential_decay(self):
        sol = integrate_rk45(exp_decay, [1.0], [0, 1], rel_tol=1e-9, abs_tol=1e-12)
        assert abs(sol.states[-1][0] - np.exp(-1)) < 1e-7

    def test_constant_solution_exact(self):
        sol = integrate_rk45(lambda t, y: np.zeros_like(y), [5.0], [0, 10])
        assert sol.states[-1][0] == 5.0

    def test_harmonic_oscillator_closed_form(self):
        sol = integrate_rk45(oscillator, [1, 0], [0, 2 * np.pi], rel_tol=1e-9, abs_tol=1e-12)
        assert np.abs(sol.states[-1] - [1, 0]).max() < 1e-6

    def test_span_endpoints_and_monotone_times(self):
        sol = integrate_rk45(exp_decay, [1.0], [0.5, 2.5])
        assert sol.times[0] == 0.5 and sol.times[-1] == 2.5
        assert np.all(np.diff(sol.times) > 0)
        assert np.all(np.isfinite(sol.states))

    def test_tightening_tolerance_does_not_hurt(self):
        errs = []
        for rtol in (1e-6, 1e-7, 1e-8, 1e-9):
            sol = integrate_rk45(exp_decay, [1.0], [0, 1], rel_tol=rtol, abs_tol=1e-14)
            errs.append(abs(sol.states[-1][0] - np.exp(-1)))
        for coarse, fine in zip(errs, errs[1:]):
            assert fine <= coarse * 1.5  # halving tol must not increase error

    def test_fixed_step_convergence_order(self):
        errs = []
        for h in (0.1, 0.05):
            sol = integrate_rk45(oscillator, [1, 0], [0, 2 * np.pi], fixed_step=h)
            errs.append(np.abs(sol.states[-1] - [1, 0]).max())
        order = np.log2(errs[0] / errs[1])
        assert order >= 4.5

    def test_dense_output_matches_step_states_exactly(self):
        sol = integrate_rk45(oscillator, [1, 0], [0, 3.0])
        for i in range(len(sol.times)):
            np.testing.assert_array_equal(sol.at(sol.times[i]), sol.states[i])

    def test_dense_output_accuracy_between_steps(self):
        sol = integrate_rk45(exp_decay, [1.0], [0, 1], rel_tol=1e-9, abs_tol=1e-12)
        ts = np.linspace(0, 1, 113)
        vals = sol.at(ts)[:, 0]
        assert np.abs(vals - np.exp(-ts)).max() < 1e-7

    def test_blow_up_raises_step_underflow(self):
        with pytest.raises(StepSizeUnderflowError) as err:
            integrate_rk45(lambda t, y: y**2, [1.0], [0, 2])
        assert err.value.last_time == pytest.approx(1.0, abs=0.05)

    def test_non_finite_rhs_raises(self):
        def rhs(t, y):
            return np.array([np.nan]) if t > 0.1 else -y

        with pytest.raises(IntegrationError):
            integrate_rk45(rhs, [1.0], [0, 1])

    def test_invalid_span_and_tolerances(self):
        with pytest.raises(ValueError):
            integrate_rk45(exp_decay, [1.0], [1, 1])
        with pytest.raises(ValueError):
            integrate_rk45(exp_decay, [1.0], [0, 1], rel_tol=0)


class TestResample:
    def test_two_second_trial_at_400hz(self):
        sol = integrate_rk45(exp_decay, [1.0], [0, 2])
        ts, states = resample(sol, 400)
        assert len(ts) == 801
        assert states.shape == (801, 1)

    def test_fourteen_and_a_half_seconds(self):
        sol = integrate_rk45(lambda t, y: np.zeros_like(y), [1.0], [0, 14.5])
        ts, _ = resample(sol, 400)
        assert len(ts) == 5801

    def test_identity_on_matching_uniform_grid(self):
        sol = integrate_rk45(oscillator, [1, 0], [0, 0.1], fixed_step=1 / 400)
        ts, states = resample(sol, 400)
        assert len(ts) == len(sol.times)
        np.testing.assert_allclose(ts, sol.times, atol=1e-12)
        np.testing.assert_allclose(states, sol.states, atol=1e-12)

    def test_independent_of_step_history(self):
        a = integrate_rk45(oscillator, [1, 0], [0, 1], rel_tol=1e-8, abs_tol=1e-11)
        b = integrate_rk45(oscillator, [1, 0], [0, 1], rel_tol=1e-10, abs_tol=1e-13)
        _, sa = resample(a, 100)
        _, sb = resample(b, 100)
        assert np.abs(sa - sb).max() < 1e-7

    def test_rejects_empty_or_short(self):
        sol = integrate_rk45(exp_decay, [1.0], [0, 0.001])
        with pytest.raises(ValueError):
            resample(sol, 400)
        with pytest.raises(ValueError):
            resample(sol, -1)


class TestFiniteDiff:
    def test_linear_signal_exact(self):
        t = np.arange(100) * 0.0025
        np.testing.assert_allclose(finite_diff_central(t, 0.0025), 1.0)

    def test_quadratic_interior_exact(self):
        dt = 0.0025
        t = 1.0 + np.arange(-5, 6) * dt
        d = finite_diff_central(t**2, dt)
        assert abs(d[5] - 2.0) < 1e-9

    def test_constant_zero(self):
        np.testing.assert_array_equal(finite_diff_central(np.full(10, 3.3), 0.1), 0.0)

    def test_requires_three_samples(self):
        with pytest.raises(ValueError):
            finite_diff_central(np.array([1.0, 2.0]), 0.1)

    def test_multichannel(self):
        dt = 0.01
        t = np.arange(50) * dt
        sig = np.stack([t, t**2], axis=1)
        d = finite_diff_central(sig, dt)
        np.testing.assert_allclose(d[:, 0], 1.0)
        np.testing.assert_allclose(d[1:-1, 1], 2 * t[1:-1], atol=1e-9)
