"""Averaged and switched models of a three-phase inverter feeding an LCL filter.

Three-phase quantities are numpy arrays of shape ``(3,)`` ordered (a, b, c).
Every phase is referenced to a common grounded neutral, so the per-phase
ladder equations are decoupled:

    L1 di_l/dt = v_inv - v_c - R1 i_l
    C  dv_c/dt = i_l - i_g
    L2 di_g/dt = v_c - v_pcc - R2 i_g
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import ConfigurationError, NumericDomainError


@dataclass(frozen=True)
class CircuitParams:
    """Filter, DC link and grid parameters.

    Defaults are the filter and grid values of the reference study system.
    ``grid_series_r`` and ``grid_series_l`` model the grid behind the PCC.
    """

    r1: float = 0.5
    r2: float = 0.5
    l1: float = 0.09e-3
    l2: float = 0.09e-3
    c: float = 4.5e-6
    vdc: float = 500.0
    f_grid: float = 60.0
    v_ll_rms: float = 220.0
    f_sw: float = 1e4
    grid_series_r: float = 0.1
    grid_series_l: float = 0.05e-3

    def __post_init__(self):
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for name, value in values.items():
            if not math.isfinite(value):
                raise ConfigurationError(f"{name} must be finite, got {value}")
        for name in ("r1", "r2", "grid_series_r", "grid_series_l"):
            if values[name] < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {values[name]}")
        for name in ("l1", "l2", "c", "vdc", "f_grid", "v_ll_rms", "f_sw"):
            if values[name] <= 0:
                raise ConfigurationError(f"{name} must be > 0, got {values[name]}")

    @property
    def omega(self):
        return 2.0 * math.pi * self.f_grid

    @property
    def v_phase_peak(self):
        """Peak phase-to-neutral grid voltage."""
        return self.v_ll_rms * math.sqrt(2.0) / math.sqrt(3.0)

    @property
    def grid_thevenin_r(self):
        """Resistance standing in for the grid series impedance at the PCC.

        The series branch is represented by its impedance magnitude at the
        grid frequency, which keeps the PCC solve algebraic.
        """
        return math.hypot(self.grid_series_r, self.omega * self.grid_series_l)

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class CircuitState:
    """LCL filter state for all three phases."""

    i_l: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_c: np.ndarray = field(default_factory=lambda: np.zeros(3))
    i_g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    def __post_init__(self):
        self.i_l = np.array(self.i_l, dtype=float).reshape(3)
        self.v_c = np.array(self.v_c, dtype=float).reshape(3)
        self.i_g = np.array(self.i_g, dtype=float).reshape(3)
        self.t = float(self.t)

    def as_array(self):
        """Rows are (i_l, v_c, i_g); columns are phases."""
        return np.stack([self.i_l, self.v_c, self.i_g])

    @classmethod
    def from_array(cls, x, t=0.0):
        x = np.asarray(x, dtype=float).reshape(3, 3)
        return cls(x[0].copy(), x[1].copy(), x[2].copy(), t)

    def energy(self, p):
        """Energy stored in the filter inductors and capacitors (J)."""
        return 0.5 * (p.l1 * self.i_l @ self.i_l + p.c * self.v_c @ self.v_c
                      + p.l2 * self.i_g @ self.i_g)


def _three(x, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise NumericDomainError(f"{name} must have shape (3,), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericDomainError(f"{name} has non-finite entries: {x}")
    return x


def lcl_derivative(state, v_inv, v_pcc, p):
    """Time derivatives of the LCL state.

    Returns a ``(3, 3)`` array with rows (di_l/dt, dv_c/dt, di_g/dt).
    """
    v_inv = _three(v_inv, "v_inv")
    v_pcc = _three(v_pcc, "v_pcc")
    x = state.as_array() if isinstance(state, CircuitState) else np.asarray(state, float)
    if not np.all(np.isfinite(x)):
        raise NumericDomainError("circuit state has non-finite entries")
    i_l, v_c, i_g = x
    return np.stack([
        (v_inv - v_c - p.r1 * i_l) / p.l1,
        (i_l - i_g) / p.c,
        (v_c - v_pcc - p.r2 * i_g) / p.l2,
    ])


def step_rk4(state, inputs, dt, p):
    """Advance ``state`` by one classical Runge-Kutta step.

    ``inputs`` is ``(v_inv, v_pcc)``.  Each entry may be a constant
    three-phase array or a callable ``f(t, i_g)`` evaluated at the stage
    times, which lets the PCC voltage depend algebraically on the grid
    current.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    v_inv, v_pcc = inputs

    def source(s, t, i_g):
        return s(t, i_g) if callable(s) else s

    def f(t, x):
        return lcl_derivative(x, source(v_inv, t, x[2]), source(v_pcc, t, x[2]), p)

    t0 = state.t
    x0 = state.as_array()
    k1 = f(t0, x0)
    k2 = f(t0 + 0.5 * dt, x0 + 0.5 * dt * k1)
    k3 = f(t0 + 0.5 * dt, x0 + 0.5 * dt * k2)
    k4 = f(t0 + dt, x0 + dt * k3)
    x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return CircuitState.from_array(x1, t0 + dt)


def clamp_modulation(m):
    """Clamp a modulation vector to [-1, 1]; returns ``(m, saturated)``."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise NumericDomainError(f"modulation has non-finite entries: {m}")
    clipped = np.clip(m, -1.0, 1.0)
    return clipped, bool(np.any(clipped != m))


def averaged_inverter(m, vdc):
    """Averaged two-level inverter: ``v_inv = m * vdc / 2``.

    Returns ``(v_inv, saturated)``; modulation outside [-1, 1] is clamped.
    """
    m, saturated = clamp_modulation(m)
    return m * (0.5 * vdc), saturated


def carrier(t, f_sw):
    """Symmetric triangular carrier in [-1, 1], equal to -1 at t = 0."""
    phase = np.mod(np.asarray(t, dtype=float) * f_sw, 1.0)
    return 1.0 - 4.0 * np.abs(phase - 0.5)


def spwm_inverter(m, t, vdc, f_sw):
    """Switched sinusoidal PWM output at time ``t``.

    Each leg sits at ``+vdc/2`` while its reference is at or above the
    carrier and at ``-vdc/2`` otherwise.  Returns ``(v_inv, saturated)``.
    """
    m, saturated = clamp_modulation(m)
    v = np.where(m >= carrier(t, f_sw), 0.5 * vdc, -0.5 * vdc)
    return v, saturated


def source_voltage(t, p):
    """Balanced positive-sequence grid source voltages at time ``t``."""
    th = p.omega * t
    return p.v_phase_peak * np.array(
        [math.cos(th), math.cos(th - 2 * math.pi / 3), math.cos(th + 2 * math.pi / 3)]
    )
