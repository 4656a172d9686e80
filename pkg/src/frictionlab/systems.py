"""Equations of motion for the two contact testbeds.

Pendulum-on-a-Box (PoB): a box sliding on the ground with a torque-driven
link pivoted on top, the link angle ``theta`` measured from the upright
vertical and positive toward +x. The non-inverted cart-pole relative: the
pole is powered, the wheels are replaced by surface friction. See
``docs/dynamics.md`` for the Lagrangian derivation.

Spring-Damper-on-a-Box (SDoB): a sliding bottom mass pulled by an external
force, loaded by a top mass through a vertical spring-damper so the normal
force varies along the trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .friction import LuGreParams, lugre_force, lugre_zdot
from .numerics import integrate_rk45


@dataclass(frozen=True)
class PoBParams:
    """Pendulum-on-a-Box physical parameters."""

    m_b: float = 0.5  # box mass [kg]
    m_l: float = 1.0  # link mass [kg]
    length: float = 0.5  # link length [m]
    d: float = 0.25  # pivot-to-CoM distance [m]
    j_l: float = 0.042  # link inertia about its CoM [kg m^2]
    g: float = 9.81  # gravity [m/s^2]

    def __post_init__(self):
        for name in ("m_b", "m_l", "length", "d", "j_l", "g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class PoBState:
    """Mechanical state of the PoB system plus the bristle state."""

    x_b: float = 0.0
    xdot_b: float = 0.0
    theta: float = 0.0
    thetadot: float = 0.0
    z: float = 0.0

    def as_array(self):
        return np.array([self.x_b, self.xdot_b, self.theta, self.thetadot, self.z])

    @classmethod
    def from_array(cls, arr):
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class SDoBParams:
    """Spring-Damper-on-a-Box parameters.

    Defaults give the same static normal force as the PoB system
    ((m1 + m2) g = 14.715 N) with a ~7 Hz vertical mode.
    """

    m1: float = 0.5  # bottom (sliding) mass [kg]
    m2: float = 1.0  # top mass [kg]
    k: float = 2000.0  # spring stiffness [N/m]
    c: float = 20.0  # damper [N s/m]
    rest_len: float = 0.2  # unloaded spring length [m]
    g: float = 9.81

    def __post_init__(self):
        for name in ("m1", "m2", "k", "c", "rest_len", "g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SDoBState:
    """SDoB state; y2 is the top-mass height relative to static equilibrium."""

    x1: float = 0.0
    xdot1: float = 0.0
    y2: float = 0.0
    ydot2: float = 0.0
    z: float = 0.0

    def as_array(self):
        return np.array([self.x1, self.xdot1, self.y2, self.ydot2, self.z])

    @classmethod
    def from_array(cls, arr):
        return cls(*(float(v) for v in arr))


def normal_force_estimate(theta, thetadot, p: PoBParams):
    """Signed state-only normal-force estimate for the PoB contact.

    F_N_hat = m_L d thetadot^2 cos(theta) - (m_b + m_L) g. Negative while
    the box loads the ground (its magnitude is the contact force); it
    crosses zero when the link spins fast enough to unload the contact.
    Consumers take the absolute value.
    """
    return p.m_l * p.d * thetadot**2 * np.cos(theta) - (p.m_b + p.m_l) * p.g


def would_be_acceleration(theta, thetadot, thetaddot, p: PoBParams):
    """Box acceleration the PoB would have with zero contact friction.

    xddot_star = m_L d (-thetaddot cos(theta) + thetadot^2 sin(theta)) / (m_b + m_L).
    """
    return (
        p.m_l
        * p.d
        * (-thetaddot * np.cos(theta) + thetadot**2 * np.sin(theta))
        / (p.m_b + p.m_l)
    )


def friction_from_eom(xddot_b, theta, thetadot, thetaddot, p: PoBParams):
    """Friction force implied by the box equation of motion.

    F_f = -(m_b + m_L) xddot_b - m_L d (thetaddot cos(theta) - thetadot^2 sin(theta)).
    This is the measurement-side friction target used for training losses,
    baselines, and evaluation.
    """
    return -(p.m_b + p.m_l) * xddot_b - p.m_l * p.d * (
        thetaddot * np.cos(theta) - thetadot**2 * np.sin(theta)
    )


def pob_solve_accel(theta, thetadot, tau, f_f, p: PoBParams):
    """Solve the coupled 2x2 system for (xddot_b, thetaddot) given a friction force."""
    s, c = math.sin(theta), math.cos(theta)
    m00 = p.m_b + p.m_l
    m01 = p.m_l * p.d * c
    m11 = p.j_l + p.m_l * p.d**2
    det = m00 * m11 - m01 * m01
    assert det > 0, "singular PoB mass matrix (non-physical parameters)"
    r0 = p.m_l * p.d * thetadot**2 * s - f_f
    r1 = p.m_l * p.d * p.g * s + tau
    xddot = (r0 * m11 - m01 * r1) / det
    thetaddot = (m00 * r1 - m01 * r0) / det
    return xddot, thetaddot


def pob_friction_terms(state, p: PoBParams, fric: LuGreParams):
    """Ground-truth contact quantities at a state: (signed F_N estimate, zdot, F_f)."""
    _, v, theta, thetadot, z = state
    f_n_signed = normal_force_estimate(theta, thetadot, p)
    zdot = lugre_zdot(v, z, abs(f_n_signed), fric)
    f_f = lugre_force(z, zdot, v, fric)
    return f_n_signed, zdot, f_f


def pob_dynamics(state, tau, p: PoBParams, fric: LuGreParams):
    """State derivative of the PoB system under ground-truth LuGre friction.

    ``state`` is [x_b, xdot_b, theta, thetadot, z]. The normal force driving
    the friction law is |F_N_hat| from the state-only estimate, keeping data
    generation and estimation self-consistent.
    """
    _, v, theta, thetadot, _ = state
    _, zdot, f_f = pob_friction_terms(state, p, fric)
    xddot, thetaddot = pob_solve_accel(theta, thetadot, tau, f_f, p)
    return np.array([v, xddot, thetadot, thetaddot, zdot])


def sdob_normal_force(y2, ydot2, p: SDoBParams):
    """Contact normal force (m1 + m2) g + m2 y2ddot, clipped at zero.

    With y2 measured from static equilibrium, m2 y2ddot = -(k y2 + c ydot2),
    so the spring-damper directly modulates the contact load. A clip at
    zero marks contact loss.
    """
    return np.maximum(0.0, (p.m1 + p.m2) * p.g - p.k * y2 - p.c * ydot2)


def sdob_dynamics(state, f_ext, p: SDoBParams, fric: LuGreParams):
    """State derivative of the SDoB system under ground-truth LuGre friction.

    ``state`` is [x1, xdot1, y2, ydot2, z]. The top mass moves vertically
    through the spring-damper only; the bottom mass slides under the
    external pull against LuGre friction at the (time-varying) normal force.
    """
    _, v, y2, ydot2, z = state
    yddot2 = -(p.k * y2 + p.c * ydot2) / p.m2
    f_n = sdob_normal_force(y2, ydot2, p)
    zdot = lugre_zdot(v, z, f_n, fric)
    f_f = lugre_force(z, zdot, v, fric)
    xddot1 = (f_ext - f_f) / p.m1
    return np.array([v, xddot1, ydot2, yddot2, zdot])


def simulate_pob(tau_fn, t_span, p, fric, state0=None, rel_tol=1e-8, abs_tol=1e-10):
    """Integrate the PoB system; ``tau_fn(t, state)`` supplies the link torque."""
    y0 = np.zeros(5) if state0 is None else np.asarray(state0, dtype=float)

    def rhs(t, y):
        return pob_dynamics(y, tau_fn(t, y), p, fric)

    return integrate_rk45(rhs, y0, t_span, rel_tol=rel_tol, abs_tol=abs_tol)


def simulate_sdob(f_ext_fn, t_span, p, fric, state0=None, rel_tol=1e-8, abs_tol=1e-10):
    """Integrate the SDoB system; ``f_ext_fn(t)`` supplies the pull force."""
    y0 = np.zeros(5) if state0 is None else np.asarray(state0, dtype=float)

    def rhs(t, y):
        return sdob_dynamics(y, f_ext_fn(t), p, fric)

    return integrate_rk45(rhs, y0, t_span, rel_tol=rel_tol, abs_tol=abs_tol)
