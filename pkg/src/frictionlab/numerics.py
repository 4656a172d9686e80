"""Adaptive ODE integration and signal utilities.

Implements the Dormand-Prince 5(4) embedded Runge-Kutta pair with a
quartic dense-output interpolant, so trajectories can be sampled at an
arbitrary rate without constraining the adaptive step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class IntegrationError(RuntimeError):
    """The right-hand side returned a non-finite value."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class StepSizeUnderflowError(IntegrationError):
    """Step control drove the step below the resolvable scale (stiffness or blow-up)."""


# Dormand-Prince 5(4) tableau (the pair behind MATLAB's ode45).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# Difference between the 5th- and embedded 4th-order weights.
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Quartic dense-output coefficients for the pair (Shampine's interpolant):
# y(t0 + x h) = y0 + h * K^T (P [x, x^2, x^3, x^4]).
_P = np.array(
    [
        [
            1.0,
            -8048581381 / 2820520608,
            8663915743 / 2820520608,
            -12715105075 / 11282082432,
        ],
        [0.0, 0.0, 0.0, 0.0],
        [
            0.0,
            131558114200 / 32700410799,
            -68118460800 / 10900136933,
            87487479700 / 32700410799,
        ],
        [
            0.0,
            -1754552775 / 470086768,
            14199869525 / 1410260304,
            -10690763975 / 1880347072,
        ],
        [
            0.0,
            127303824393 / 49829197408,
            -318862633887 / 49829197408,
            701980252875 / 199316789632,
        ],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_MIN_STEP_FRACTION = 1e-12


@dataclass
class OdeSolution:
    """Accepted trajectory of an adaptive integration with dense output.

    ``times`` are the accepted step endpoints (strictly increasing, spanning
    the requested interval); ``states`` holds one state row per time.
    ``interp_coeffs[i]`` are the quartic coefficients valid on
    ``[times[i], times[i+1]]``.
    """

    times: np.ndarray
    states: np.ndarray
    interp_coeffs: np.ndarray  # (n_steps, n_dim, 4)
    stats: dict = field(default_factory=dict)

    @property
    def t_span(self):
        return float(self.times[0]), float(self.times[-1])

    def at(self, t):
        """Evaluate the dense-output interpolant at scalar or array times."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        t0, t1 = self.t_span
        if np.any(t < t0 - 1e-12) or np.any(t > t1 + 1e-12):
            raise ValueError(f"evaluation time outside solution span [{t0}, {t1}]")
        t = np.clip(t, t0, t1)
        # locate the step containing each query time
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.times) - 2)
        h = self.times[idx + 1] - self.times[idx]
        x = (t - self.times[idx]) / h
        powers = np.stack([x, x**2, x**3, x**4], axis=-1)  # (m, 4)
        # states[idx] + h * coeffs @ powers
        out = self.states[idx] + h[:, None] * np.einsum(
            "mdk,mk->md", self.interp_coeffs[idx], powers
        )
        # step endpoints reproduce the stored states bit-exactly
        at_end = x == 1.0
        if np.any(at_end):
            out[at_end] = self.states[idx[at_end] + 1]
        return out if out.shape[0] > 1 else out[0]


def _initial_step(rhs, t0, y0, f0, t1, rel_tol, abs_tol):
    """Hairer-style heuristic for the first trial step."""
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((y0 / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t1 - t0)
    y1 = y0 + h0 * f0
    f1 = np.asarray(rhs(t0 + h0, y1), dtype=float)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t1 - t0)


def integrate_rk45(
    rhs,
    y0,
    t_span,
    rel_tol=1e-8,
    abs_tol=1e-10,
    max_step=np.inf,
    fixed_step=None,
):
    """Integrate ``dy/dt = rhs(t, y)`` over ``t_span`` with the DP 5(4) pair.

    Adaptive step control keeps the local error estimate under the mixed
    tolerance ``abs_tol + rel_tol * |y|`` (RMS over components). Passing
    ``fixed_step`` disables the error control and marches at a constant
    step (used for convergence-order verification).

    Raises :class:`StepSizeUnderflowError` if the controller needs a step
    below ``1e-12 * (t1 - t0)`` and :class:`IntegrationError` on non-finite
    right-hand sides.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"t_span must satisfy t1 > t0, got {t_span}")
    if rel_tol <= 0 or np.any(np.asarray(abs_tol) <= 0):
        raise ValueError("tolerances must be positive")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    n = y0.size
    abs_tol = np.broadcast_to(np.asarray(abs_tol, dtype=float), (n,))

    times = [t0]
    states = [y0.copy()]
    coeffs = []
    n_accepted = 0
    n_rejected = 0
    n_rhs = 1

    f0 = np.asarray(rhs(t0, y0), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise IntegrationError("non-finite rhs at initial state", last_time=t0)

    if fixed_step is not None:
        h = float(fixed_step)
        if h <= 0:
            raise ValueError("fixed_step must be positive")
    else:
        h = _initial_step(rhs, t0, y0, f0, t1, rel_tol, np.mean(abs_tol))
        n_rhs += 1
    h = min(h, max_step, t1 - t0)
    min_step = _MIN_STEP_FRACTION * (t1 - t0)

    t, y, f = t0, y0, f0
    K = np.empty((7, n))
    while t < t1:
        h = min(h, t1 - t, max_step)
        if h < min_step:
            raise StepSizeUnderflowError(
                f"step size underflow at t={t:.6g} (stiffness or blow-up)",
                last_time=t,
            )
        K[0] = f
        for s in range(1, 7):
            ys = y + h * (K[:s].T @ _A[s])
            K[s] = rhs(t + _C[s] * h, ys)
        n_rhs += 6
        if not np.all(np.isfinite(K)):
            raise IntegrationError(f"non-finite rhs during step at t={t:.6g}", last_time=t)
        y_new = y + h * (K.T @ _B5)
        if fixed_step is None:
            err = h * (K.T @ _E)
            scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = math.sqrt(float(np.mean((err / scale) ** 2)))
        else:
            err_norm = 0.0

        if err_norm <= 1.0:
            coeffs.append(K.T @ _P)
            t = t + h
            y = y_new
            f = K[6]  # FSAL: last stage is the rhs at the new point
            times.append(t)
            states.append(y.copy())
            n_accepted += 1
            if fixed_step is None:
                factor = 5.0 if err_norm == 0.0 else min(5.0, 0.9 * err_norm ** -0.2)
                h *= max(0.2, factor)
        else:
            n_rejected += 1
            h *= max(0.2, 0.9 * err_norm ** -0.2)

    times = np.asarray(times)
    # guard against fp drift at the final point
    times[-1] = t1
    return OdeSolution(
        times=times,
        states=np.asarray(states),
        interp_coeffs=np.asarray(coeffs),
        stats={"n_accepted": n_accepted, "n_rejected": n_rejected, "n_rhs": n_rhs},
    )


def resample(solution: OdeSolution, rate):
    """Sample a solution on a uniform grid ``t0, t0 + 1/rate, ...``.

    Returns ``(times, states)`` with ``floor(span * rate) + 1`` samples drawn
    from the dense-output interpolant.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if solution.times.size < 2:
        raise ValueError("cannot resample an empty solution")
    t0, t1 = solution.t_span
    span = t1 - t0
    if span < 1.0 / rate:
        raise ValueError(f"solution span {span:.6g} s shorter than one sample period")
    count = int(math.floor(span * rate + 1e-9)) + 1
    ts = t0 + np.arange(count) / rate
    ts[-1] = min(ts[-1], t1)
    return ts, np.atleast_2d(solution.at(ts))


def finite_diff_central(signal, dt):
    """Differentiate a uniformly sampled series.

    Interior points use the central difference ``(f[i+1] - f[i-1]) / (2 dt)``;
    the two endpoints fall back to one-sided first-order differences.
    """
    signal = np.asarray(signal, dtype=float)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if signal.shape[0] < 3:
        raise ValueError("need at least 3 samples for finite differences")
    out = np.empty_like(signal)
    out[1:-1] = (signal[2:] - signal[:-2]) / (2.0 * dt)
    out[0] = (signal[1] - signal[0]) / dt
    out[-1] = (signal[-1] - signal[-2]) / dt
    return out
