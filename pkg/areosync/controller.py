""":mod:`areosync.controller` --- Internal feedback thrust laws

Each satellite regulates its radius, radial velocity and angular velocity
about the desired circular orbit, and receives the coordination input ``u_i``
from the network through a time-varying gain ``k_c``. Substituting the
thrust laws into the truth dynamics (without perturbations) leaves::

    v_dot     = -k_v (v - v_d) - k_r (r - r_d)
    omega_dot = -(k_omega / r) (omega - omega_d) + u / k_c

"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SOL, ThrustCommand

logger = logging.getLogger(__name__)

ACQUISITION = 'acquisition'
STATION_KEEPING = 'station-keeping'
PHASES = (ACQUISITION, STATION_KEEPING)

SPECIFIC_FORCE = 'specific-force'
AS_PRINTED = 'as-printed'
RADIAL_CONVENTIONS = (SPECIFIC_FORCE, AS_PRINTED)

WARN_ONLY = 'warn-only'
CLAMP = 'clamp'
SATURATION_MODES = (WARN_ONLY, CLAMP)


@dataclass(frozen=True)
class GainSet:
    """Controller gains and the coordination gain schedule.

    With the ``specific-force`` radial convention ``k_r`` and ``k_v`` act on
    the specific force, so the radial closed loop does not depend on mass.
    ``as-printed`` applies them in newtons instead, which divides both by
    the satellite mass in the closed loop.

    """
    k_r: float = 1e-5
    k_v: float = 1e-4
    k_omega: float = 1e4
    kc_bar: float = 1e11
    kc_floor: float = 1e9
    c: float = 30.0
    t_f: float = 355 * SOL
    radial_convention: str = SPECIFIC_FORCE

    def __post_init__(self):
        for name in ('k_r', 'k_v', 'k_omega', 'kc_floor', 'c', 't_f'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError('%s must be positive, got %r' % (name, value))
        if not self.kc_bar > self.kc_floor:
            raise ValueError('kc_bar must exceed kc_floor (%r <= %r)'
                             % (self.kc_bar, self.kc_floor))
        if self.radial_convention not in RADIAL_CONVENTIONS:
            raise ValueError('radial_convention must be one of %s, got %r'
                             % (RADIAL_CONVENTIONS, self.radial_convention))

    def effective_radial_gains(self, mass):
        """Return ``(k_r, k_v)`` as they appear in the radial closed loop."""
        if self.radial_convention == AS_PRINTED:
            return self.k_r / mass, self.k_v / mass
        return self.k_r, self.k_v


@dataclass(frozen=True)
class DesiredOrbit:
    """Circular target orbit; ``omega_d`` always follows from ``mu`` and ``r_d``."""
    r_d: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.r_d) and self.r_d > 0):
            raise ValueError('r_d must be positive, got %r' % (self.r_d,))
        if not self.mu > 0:
            raise ValueError('mu must be positive, got %r' % (self.mu,))

    @classmethod
    def for_planet(cls, planet, r_d):
        return cls(r_d, planet.mu)

    @property
    def v_d(self):
        return 0.0

    @property
    def omega_d(self):
        return math.sqrt(self.mu / self.r_d ** 3)


def kc_phase(t, gains):
    return ACQUISITION if t <= gains.t_f else STATION_KEEPING


def kc_schedule(t, gains, phase=None):
    """Coordination gain: exponential decay while acquiring, floor after."""
    if phase is None:
        phase = kc_phase(t, gains)
    if phase == STATION_KEEPING:
        return gains.kc_floor
    decay = math.exp(-gains.c * t / gains.t_f)
    return (gains.kc_bar - gains.kc_floor) * decay + gains.kc_floor


def kc_rate(t, gains, phase=None):
    if phase is None:
        phase = kc_phase(t, gains)
    if phase == STATION_KEEPING:
        return 0.0
    decay = math.exp(-gains.c * t / gains.t_f)
    return -gains.c / gains.t_f * (gains.kc_bar - gains.kc_floor) * decay


def radial_thrust_law(r, v, omega, mass, gains, desired):
    k_r, k_v = gains.effective_radial_gains(mass)
    return mass * (-r * omega ** 2 + desired.mu / r ** 2
                   - k_v * (v - desired.v_d) - k_r * (r - desired.r_d))


def tangential_thrust_law(r, v, omega, mass, gains, desired, u, k_c):
    return mass * (2.0 * v * omega - gains.k_omega * (omega - desired.omega_d)
                   + r / k_c * u)


def radial_thrust(state, gains, desired):
    return float(radial_thrust_law(state.r, state.v, state.omega, state.mass,
                                   gains, desired))


def tangential_thrust(state, gains, desired, u_i, k_c_t):
    return float(tangential_thrust_law(state.r, state.v, state.omega,
                                       state.mass, gains, desired, u_i, k_c_t))


def saturate_arrays(tau_r, tau_theta, tau_max, mode=WARN_ONLY):
    """Apply the actuator limit to arrays of thrusts.

    Returns the (possibly clamped) thrusts and the per-component masks of
    commands that exceeded ``tau_max``.

    """
    over_r = np.abs(tau_r) > tau_max
    over_theta = np.abs(tau_theta) > tau_max
    if mode == CLAMP:
        tau_r = np.clip(tau_r, -tau_max, tau_max)
        tau_theta = np.clip(tau_theta, -tau_max, tau_max)
    return tau_r, tau_theta, over_r, over_theta


def saturate(cmd, tau_max, mode=WARN_ONLY):
    if not tau_max > 0:
        raise ValueError('tau_max must be positive, got %r' % (tau_max,))
    if mode not in SATURATION_MODES:
        raise ValueError('unknown saturation mode %r' % (mode,))
    tau_r, tau_theta, over_r, over_theta = saturate_arrays(
        cmd.tau_r, cmd.tau_theta, tau_max, mode)
    saturated = bool(over_r or over_theta)
    if saturated and mode == WARN_ONLY:
        logger.warning('Thrust (%.6g, %.6g) N exceeds the %.6g N limit',
                       cmd.tau_r, cmd.tau_theta, tau_max)
    return ThrustCommand(float(tau_r), float(tau_theta), saturated)
