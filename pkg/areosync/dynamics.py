""":mod:`areosync.dynamics` --- Planar restricted two-body truth dynamics

The model integrated by the simulator: radial and tangential motion of each
satellite about the planet, driven by thrust and by the point-mass gravity of
the planet's moons. Every function here is pure. The ``*_rates`` and
``moon_accelerations`` helpers work on whole arrays of satellites at once and
are what the engine calls; the dataclass-level operations wrap them for a
single satellite.

"""
import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Mean Martian solar day, used to report times in Sols.
SOL = 88775.244

MIN_MOON_SEPARATION = 1.0e3


class DynamicsError(ValueError):
    """The truth model left its domain of validity."""
    def __init__(self, msg, sat_index=None, t=None):
        if sat_index is not None:
            msg = '%s (satellite %d' % (msg, sat_index)
            msg += ', t=%.3f s)' % t if t is not None else ')'
        elif t is not None:
            msg = '%s (t=%.3f s)' % (msg, t)
        super(DynamicsError, self).__init__(msg)
        self.sat_index = sat_index
        self.t = t


@dataclass(frozen=True)
class PlanetModel:
    mu: float
    equatorial_radius: float = 0.0
    name: str = 'planet'

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError('mu must be positive, got %r' % (self.mu,))


@dataclass(frozen=True)
class MoonModel:
    """A moon on a circular, equatorial orbit."""
    name: str
    mu_p: float
    orbit_radius: float
    angular_rate: float
    initial_phase: float = 0.0

    def __post_init__(self):
        if not self.mu_p >= 0:
            raise ValueError('moon %s: mu_p must be >= 0' % self.name)
        if not self.orbit_radius > 0:
            raise ValueError('moon %s: orbit_radius must be > 0' % self.name)

    @classmethod
    def about(cls, planet, name, mu_p, orbit_radius, initial_phase=0.0):
        """Return a moon with the Keplerian rate of a circular orbit."""
        rate = math.sqrt(planet.mu / orbit_radius ** 3)
        return cls(name, mu_p, orbit_radius, rate, initial_phase)


@dataclass
class SatelliteTruthState:
    r: float
    v: float
    omega: float
    theta: float
    mass: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError('r must be > 0, got %r' % (self.r,))
        if not self.mass > 0:
            raise ValueError('mass must be > 0, got %r' % (self.mass,))


@dataclass(frozen=True)
class PerturbationAccel:
    a_r: float = 0.0
    a_theta: float = 0.0

    def __add__(self, other):
        return PerturbationAccel(self.a_r + other.a_r,
                                 self.a_theta + other.a_theta)


@dataclass(frozen=True)
class ThrustCommand:
    tau_r: float = 0.0
    tau_theta: float = 0.0
    saturated: bool = False


CONSTANT_SETS = {
    'mars-example': {
        'planet': {'name': 'mars', 'mu': 4.282837e13,
                   'equatorial_radius': 3396.2e3},
        'moons': [
            {'name': 'phobos', 'mu_p': 7.161e5, 'orbit_radius': 9234.42e3},
            {'name': 'deimos', 'mu_p': 1.041e5, 'orbit_radius': 23455.50e3},
        ],
    },
}


def constant_set(name, moon_phases=None):
    """Return ``(planet, moons)`` for a built-in constant set."""
    try:
        values = CONSTANT_SETS[name]
    except KeyError:
        raise ValueError('unknown constant set %r (known: %s)'
                         % (name, ', '.join(sorted(CONSTANT_SETS))))
    planet = PlanetModel(**values['planet'])
    phases = moon_phases or {}
    moons = [MoonModel.about(planet, m['name'], m['mu_p'], m['orbit_radius'],
                             phases.get(m['name'], 0.0))
             for m in values['moons']]
    return planet, moons


def wrap_angle(theta):
    """Wrap an unwrapped angle to [0, 2*pi) for display."""
    return np.mod(theta, TWO_PI)


def check_states(r, v, omega, theta, t=None):
    """Raise :class:`DynamicsError` for the first invalid satellite."""
    finite = (np.isfinite(r) & np.isfinite(v) & np.isfinite(omega)
              & np.isfinite(theta))
    if not finite.all():
        index = int(np.flatnonzero(~finite)[0])
        raise DynamicsError('non-finite state', index, t)
    if not (r > 0).all():
        index = int(np.flatnonzero(~(r > 0))[0])
        raise DynamicsError('radius %r is not positive'
                            % float(np.asarray(r)[index]), index, t)


def planar_rates(r, v, omega, tau_r, tau_theta, a_r, a_theta, mass, mu):
    """Return ``(r_dot, v_dot, omega_dot, theta_dot)`` for arrays of satellites."""
    v_dot = r * omega ** 2 - mu / r ** 2 + tau_r / mass + a_r
    omega_dot = -2.0 * v * omega / r + tau_theta / (mass * r) + a_theta / r
    return v, v_dot, omega_dot, omega


def truth_derivatives(state, thrust, perturb, planet, sat_index=0, t=None):
    """Time derivative ``(r_dot, v_dot, omega_dot, theta_dot)`` of one satellite."""
    r, v, omega, theta = (np.array([x], dtype=float) for x in
                          (state.r, state.v, state.omega, state.theta))
    try:
        check_states(r, v, omega, theta, t)
    except DynamicsError:
        raise DynamicsError('invalid state r=%r v=%r omega=%r theta=%r'
                            % (state.r, state.v, state.omega, state.theta),
                            sat_index, t)
    inputs = (thrust.tau_r, thrust.tau_theta, perturb.a_r, perturb.a_theta)
    if not all(math.isfinite(x) for x in inputs):
        raise DynamicsError('non-finite thrust or perturbation', sat_index, t)
    rates = planar_rates(r, v, omega, thrust.tau_r, thrust.tau_theta,
                         perturb.a_r, perturb.a_theta, state.mass, planet.mu)
    rates = tuple(float(x[0]) for x in rates)
    if not all(math.isfinite(x) for x in rates):
        raise DynamicsError('non-finite derivative', sat_index, t)
    return rates


def moon_position(moon, t):
    """Return ``(r_p, theta_p)`` of a moon at time ``t``."""
    return moon.orbit_radius, moon.initial_phase + moon.angular_rate * t


class MoonField(object):
    """Point-mass pull of a fixed set of moons, evaluated for all satellites.

    Each moon pulls with ``mu_p / d**2`` along the satellite-to-moon line,
    and the inertial vector is rotated into the satellite's radial and
    tangential directions.

    """
    def __init__(self, moons, min_separation=MIN_MOON_SEPARATION):
        self.moons = tuple(moons)
        self.min_separation = min_separation
        self._mu = np.array([m.mu_p for m in self.moons], dtype=float)
        self._radius = np.array([m.orbit_radius for m in self.moons],
                                dtype=float)
        self._rate = np.array([m.angular_rate for m in self.moons],
                              dtype=float)
        self._phase = np.array([m.initial_phase for m in self.moons],
                               dtype=float)

    def __bool__(self):
        return bool(self.moons)

    def accelerations(self, r, theta, t):
        """Return ``(a_r, a_theta)`` arrays shaped like ``r``."""
        if not self.moons:
            return np.zeros_like(r, dtype=float), np.zeros_like(r, dtype=float)
        phase = self._phase + self._rate * t
        cos_t = np.cos(theta)
        sin_t = np.sin(theta)
        # satellites along the rows, moons along the columns
        dx = (r * cos_t)[:, None] - self._radius * np.cos(phase)
        dy = (r * sin_t)[:, None] - self._radius * np.sin(phase)
        d2 = dx * dx + dy * dy
        if d2.min() < self.min_separation ** 2:
            index, moon = np.unravel_index(int(np.argmin(d2)), d2.shape)
            raise DynamicsError('within %.0f m of %s'
                                % (self.min_separation,
                                   self.moons[moon].name), int(index), t)
        scale = -self._mu / (d2 * np.sqrt(d2))
        fx = (scale * dx).sum(axis=1)
        fy = (scale * dy).sum(axis=1)
        return cos_t * fx + sin_t * fy, cos_t * fy - sin_t * fx


def moon_accelerations(r, theta, moons, t, min_separation=MIN_MOON_SEPARATION):
    """Radial and tangential specific force of all moons on all satellites."""
    r = np.asarray(r, dtype=float)
    return MoonField(moons, min_separation).accelerations(
        r, np.asarray(theta, dtype=float), t)


def moon_perturbation(state, moon, t, min_separation=MIN_MOON_SEPARATION):
    return total_perturbation(state, [moon], t, min_separation)


def total_perturbation(state, moons, t, min_separation=MIN_MOON_SEPARATION):
    """Sum of the moon perturbations acting on one satellite."""
    a_r, a_theta = moon_accelerations(np.array([state.r], dtype=float),
                                      np.array([state.theta], dtype=float),
                                      moons, t, min_separation)
    return PerturbationAccel(float(a_r[0]), float(a_theta[0]))


def specific_angular_momentum(r, omega):
    return r * r * omega


def specific_energy(r, v, omega, mu):
    return 0.5 * (v * v + r * r * omega * omega) - mu / r
