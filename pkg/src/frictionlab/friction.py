"""LuGre dynamic friction model and a Coulomb+viscous reference model.

The LuGre model tracks the mean deflection ``z`` of microscopic bristles at
the contact; its evolution captures pre-sliding, stick-slip, and the
Stribeck effect. All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LuGreParams:
    """The six identifiable LuGre parameters plus the fixed shape factor.

    sigma0: bristle stiffness [N/m]
    sigma1: bristle damping [N s/m]
    sigma2: viscous coefficient [N s/m]
    mu_c:   Coulomb friction coefficient [-]
    mu_s:   static friction coefficient [-]
    v_s:    Stribeck velocity [m/s]
    alpha:  transition shape factor, fixed to 2
    """

    sigma0: float
    sigma1: float
    sigma2: float
    mu_c: float
    mu_s: float
    v_s: float
    alpha: float = field(default=2.0)

    def __post_init__(self):
        for name in ("sigma0", "sigma1", "sigma2", "v_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.mu_c <= self.mu_s:
            raise ValueError(
                f"need 0 < mu_c <= mu_s, got mu_c={self.mu_c}, mu_s={self.mu_s}"
            )
        if self.alpha != 2.0:
            raise ValueError("only the shape factor alpha = 2 is supported")

    def as_vector(self):
        """[sigma0, sigma1, sigma2, mu_c, mu_s, v_s] — the identifiable set."""
        return np.array(
            [self.sigma0, self.sigma1, self.sigma2, self.mu_c, self.mu_s, self.v_s]
        )

    @classmethod
    def from_vector(cls, vec):
        return cls(*(float(v) for v in vec))


PARAM_NAMES = ("sigma0", "sigma1", "sigma2", "mu_c", "mu_s", "v_s")

# Parameter set used as ground truth throughout the evaluation suite.
GROUND_TRUTH = LuGreParams(
    sigma0=1.0e5,
    sigma1=316.23,
    sigma2=0.40,
    mu_c=0.30,
    mu_s=0.60,
    v_s=1.0e-3,
)


def stribeck_g(v, f_n, p: LuGreParams):
    """Velocity-dependent sliding resistance g(v) = F_c + (F_s - F_c) e^{-(|v|/v_s)^alpha}.

    Coulomb and static levels come from the normal force magnitude:
    F_c = mu_c |F_N|, F_s = mu_s |F_N|. Even in v, bounded by [F_c, F_s].
    """
    f_c = p.mu_c * np.abs(f_n)
    f_s = p.mu_s * np.abs(f_n)
    return f_c + (f_s - f_c) * np.exp(-((np.abs(v) / p.v_s) ** p.alpha))


def lugre_zdot(v, z, f_n, p: LuGreParams):
    """Bristle state evolution dz/dt = v - sigma0 |v| z / g(v).

    For F_N = 0 the contact carries no load and g vanishes; the bristles
    cannot deflect, so the contact-free limit dz/dt = v applies.
    """
    g = stribeck_g(v, f_n, p)
    safe_g = np.where(g > 0, g, 1.0)
    return np.where(g > 0, v - p.sigma0 * np.abs(v) * z / safe_g, v)


def lugre_force(z, zdot, v, p: LuGreParams):
    """Friction force F_f = sigma0 z + sigma1 dz/dt + sigma2 v."""
    return p.sigma0 * z + p.sigma1 * zdot + p.sigma2 * v


def lugre_steady_state_z(v, f_n, p: LuGreParams):
    """Bristle deflection at steady state, sgn(v) g(v) / sigma0."""
    return np.sign(v) * stribeck_g(v, f_n, p) / p.sigma0


def lugre_steady_state_force(v, f_n, p: LuGreParams):
    """Constant-velocity friction force sgn(v) g(v) + sigma2 v.

    The steady state is undefined at rest; v = 0 maps to 0 (stiction
    regime, force set by the rest of the system instead).
    """
    return np.where(
        np.asarray(v) == 0,
        0.0,
        np.sign(v) * stribeck_g(v, f_n, p) + p.sigma2 * v,
    )


def coulomb_viscous_force(v, f_n, mu_c, sigma2):
    """Simplified friction model mu_c |F_N| sgn(v) + sigma2 v with sgn(0) = 0."""
    return mu_c * np.abs(f_n) * np.sign(v) + sigma2 * v
