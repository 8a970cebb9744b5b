"""Conventional synchronous-frame controller used to generate training data:
an SRF-PLL plus a dq PI grid-current loop with PCC voltage feedforward."""
from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .circuit import CircuitParams


@dataclass(frozen=True)
class ControllerGains:
    kp_current: float = 2.0
    ki_current: float = 400.0
    kp_pll: float = 50.0
    ki_pll: float = 1000.0
    id_ref: float = 10.0
    iq_ref: float = 0.0
    control_period: float = 50e-6

    def packed(self, p):
        """Gain vector in the layout the kernels expect."""
        g = np.zeros(8)
        g[kernels.CG_KP_I] = self.kp_current
        g[kernels.CG_KI_I] = self.ki_current
        g[kernels.CG_KP_PLL] = self.kp_pll
        g[kernels.CG_KI_PLL] = self.ki_pll
        g[kernels.CG_ID_REF] = self.id_ref
        g[kernels.CG_IQ_REF] = self.iq_ref
        g[kernels.CG_OMEGA0] = p.omega
        g[kernels.CG_VNORM] = p.v_phase_peak
        return g

    @property
    def current_ref_magnitude(self):
        return math.hypot(self.id_ref, self.iq_ref)


@dataclass
class ControllerState:
    pll_theta: float = 0.0
    pll_omega: float = 2.0 * math.pi * 60.0
    pll_integrator: float = 0.0
    pi_integrators: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def packed(self):
        cs = np.zeros(5)
        cs[kernels.CS_THETA] = self.pll_theta
        cs[kernels.CS_OMEGA] = self.pll_omega
        cs[kernels.CS_PLL_INT] = self.pll_integrator
        cs[kernels.CS_XD] = self.pi_integrators[0]
        cs[kernels.CS_XQ] = self.pi_integrators[1]
        return cs

    @classmethod
    def from_packed(cls, cs):
        return cls(float(cs[kernels.CS_THETA]), float(cs[kernels.CS_OMEGA]),
                   float(cs[kernels.CS_PLL_INT]),
                   np.array([cs[kernels.CS_XD], cs[kernels.CS_XQ]], dtype=float))

    @classmethod
    def nominal(cls, p=None, theta=0.0):
        p = p or CircuitParams()
        return cls(pll_theta=theta % (2 * math.pi), pll_omega=p.omega)


def abc_to_dq(x, theta):
    """Amplitude-invariant Park transform; a balanced cosine set at angle
    ``theta`` maps to ``(1, 0)``."""
    a, b, c = (float(v) for v in x)
    return kernels.park(a, b, c, float(theta))


def dq_to_abc(d, q, theta):
    return np.array(kernels.inv_park(float(d), float(q), float(theta)))


def pll_step(v_pcc, s, dt, p=None, gains=None):
    """One PLL update; returns a new ControllerState."""
    p = p or CircuitParams()
    gains = gains or ControllerGains()
    cs = s.packed()
    v = np.asarray(v_pcc, dtype=float)
    kernels.pll_update(v[0], v[1], v[2], cs, gains.packed(p), dt)
    return ControllerState.from_packed(cs)


def pi_current_step(i_g, v_pcc, s, dt, p=None, gains=None):
    """One current-loop update.

    Returns ``(m, new_state, saturated)`` with ``m`` the modulation
    reference normalised by ``vdc/2`` and clamped to [-1, 1].  The PLL
    angle is used as is; call :func:`pll_step` to advance it.
    """
    p = p or CircuitParams()
    gains = gains or ControllerGains()
    cs = s.packed()
    i = np.asarray(i_g, dtype=float)
    v = np.asarray(v_pcc, dtype=float)
    m = np.zeros(3)
    sat = kernels.pi_current_update(i[0], i[1], i[2], v[0], v[1], v[2], cs,
                                    gains.packed(p), p.vdc, dt, m)
    return m, ControllerState.from_packed(cs), bool(sat)
