""":mod:`areosync.engine` --- Fixed-step simulation of the constellation

The full state vector is laid out as ``[r, v, omega, theta] * n_sats``
followed by one relative angle per link. A run samples the deployment
cluster, integrates the coupled system with classical RK4 and logs a uniform
grid of samples from which the acquisition report is derived.

"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import analysis
from .controller import (ACQUISITION, SATURATION_MODES, WARN_ONLY,
                         DesiredOrbit, GainSet, kc_phase, kc_rate,
                         kc_schedule, radial_thrust_law, saturate_arrays,
                         tangential_thrust_law)
from .dynamics import (MIN_MOON_SEPARATION, SOL, DynamicsError, MoonField,
                       MoonModel, PlanetModel, SatelliteTruthState,
                       check_states, constant_set, planar_rates)
from .network import (LinkOutputFn, build_path_incidence, initial_link_angles,
                      path_coordination)

logger = logging.getLogger(__name__)

STATES_PER_SAT = 4
MONOTONE_TOL = 1e-9


class IntegrationError(RuntimeError):
    def __init__(self, msg, stage=None, t=None):
        super(IntegrationError, self).__init__(msg)
        self.stage = stage
        self.t = t


@dataclass(frozen=True)
class InitialConditionSpec:
    """Deployment cluster: ``(nominal, half_width)`` per state, sampled uniformly."""
    r: Tuple[float, float] = (20428.0e3, 0.1e3)
    v: Tuple[float, float] = (0.0, 1e-8)
    omega: Tuple[float, float] = (7.0879e-5, 1e-7)
    theta: Tuple[float, float] = (0.0, 5e-3)

    def __post_init__(self):
        for name in ('r', 'v', 'omega', 'theta'):
            nominal, half_width = getattr(self, name)
            if not (math.isfinite(nominal) and half_width >= 0):
                raise ValueError('initial condition %s needs a finite nominal '
                                 'and a half-width >= 0' % name)
        if not self.r[0] - self.r[1] > 0:
            raise ValueError('initial condition r must stay positive')


@dataclass(frozen=True)
class Scenario:
    planet: PlanetModel
    desired: DesiredOrbit
    moons: Tuple[MoonModel, ...] = ()
    n_sats: int = 10
    sat_mass: float = 100.0
    gains: GainSet = field(default_factory=GainSet)
    ic_spec: InitialConditionSpec = field(default_factory=InitialConditionSpec)
    dt: float = 10.0
    horizon: float = 355 * SOL
    seed: int = 0
    moons_enabled: bool = True
    saturation_mode: str = WARN_ONLY
    tau_max: float = 0.1
    logging_interval: float = 1000.0
    link_output: Optional[LinkOutputFn] = None
    coordination_enabled: bool = True
    min_moon_separation: float = MIN_MOON_SEPARATION
    acquisition_tol_deg: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, 'moons', tuple(self.moons))
        if not (isinstance(self.n_sats, int) and self.n_sats >= 2):
            raise ValueError('n_sats must be an integer >= 2, got %r'
                             % (self.n_sats,))
        if self.link_output is None:
            object.__setattr__(self, 'link_output',
                               LinkOutputFn.affine(self.n_sats))
        positive = ('sat_mass', 'dt', 'tau_max', 'logging_interval',
                    'min_moon_separation', 'acquisition_tol_deg')
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError('%s must be positive, got %r' % (name, value))
        if not (math.isfinite(self.horizon) and self.horizon >= 0):
            raise ValueError('horizon must be >= 0, got %r' % (self.horizon,))
        if self.logging_interval < self.dt:
            raise ValueError('logging_interval must be >= dt')
        stride = round(self.logging_interval / self.dt)
        if abs(stride * self.dt - self.logging_interval) > 1e-9 * self.logging_interval:
            raise ValueError('logging_interval must be a whole multiple of dt')
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ValueError('seed must be a 64-bit unsigned integer')
        if self.saturation_mode not in SATURATION_MODES:
            raise ValueError('saturation_mode must be one of %s'
                             % (SATURATION_MODES,))

    @property
    def log_stride(self):
        return int(round(self.logging_interval / self.dt))

    @property
    def n_steps(self):
        return int(math.floor(self.horizon / self.dt + 1e-9))


def default_scenario(constant_set_name='mars-example', r_d=20428.2e3,
                     **overrides):
    """Scenario with the built-in planet, moons and mission defaults."""
    planet, moons = constant_set(constant_set_name)
    overrides.setdefault('moons', tuple(moons))
    return Scenario(planet=planet, desired=DesiredOrbit.for_planet(planet, r_d),
                    **overrides)


@dataclass(eq=False)
class TrajectoryLog:
    t: np.ndarray
    r: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    theta: np.ndarray
    tau_r: np.ndarray
    tau_theta: np.ndarray
    u: np.ndarray
    theta_rel: np.ndarray
    y: np.ndarray
    kc: np.ndarray
    kc_dot: np.ndarray
    V: np.ndarray
    V_dot: np.ndarray

    PER_SAT = ('r', 'v', 'omega', 'theta', 'tau_r', 'tau_theta', 'u')
    PER_LINK = ('theta_rel', 'y')
    PER_STEP = ('kc', 'kc_dot', 'V', 'V_dot')

    def __len__(self):
        return len(self.t)

    @property
    def n_sats(self):
        return self.r.shape[1]

    @property
    def n_links(self):
        return self.theta_rel.shape[1]


@dataclass
class AcquisitionReport:
    t_acq: Optional[float]
    final_spacing_err_deg: list
    final_omega_err: list
    final_r_err: list
    max_abs_tau_r: float
    max_abs_tau_theta: float
    saturation_events: int
    lyapunov_monotone: Optional[bool]
    aborted: bool = False
    abort_reason: Optional[str] = None
    violation_counts: Optional[dict] = None

    @property
    def acquired(self):
        return self.t_acq is not None

    @property
    def t_acq_sols(self):
        return None if self.t_acq is None else self.t_acq / SOL


@dataclass
class StageOutputs:
    tau_r: np.ndarray
    tau_theta: np.ndarray
    u: np.ndarray
    y: np.ndarray
    kc: float
    over_r: np.ndarray
    over_theta: np.ndarray


def pack_state(states, theta_rel):
    sats = np.array([[s.r, s.v, s.omega, s.theta] for s in states], dtype=float)
    return np.concatenate([sats.ravel(), np.asarray(theta_rel, dtype=float)])


def unpack_state(x, n_sats):
    """Return ``(r, v, omega, theta, theta_rel)`` views into ``x``."""
    sats = x[:STATES_PER_SAT * n_sats].reshape(n_sats, STATES_PER_SAT)
    return sats[:, 0], sats[:, 1], sats[:, 2], sats[:, 3], \
        x[STATES_PER_SAT * n_sats:]


class ClosedLoop(object):
    """Right-hand side of the coupled satellite and link system."""
    def __init__(self, scenario):
        self.scenario = scenario
        self.topology = build_path_incidence(scenario.n_sats)
        self.n_sats = scenario.n_sats
        self.moon_field = MoonField(
            scenario.moons if scenario.moons_enabled else (),
            scenario.min_moon_separation)
        self.moons = list(self.moon_field.moons)
        self._n_sat_states = STATES_PER_SAT * self.n_sats
        self._zero_u = np.zeros(self.n_sats)

    def evaluate(self, t, x, outputs=True):
        """Derivative of ``x`` at ``t`` plus the intermediate signals.

        Order: moon perturbations, link outputs, coordination input,
        coordination gain, thrusts, then the satellite and link rates.
        With ``outputs=False`` the signals are ``None`` and warn-only
        saturation is not checked. Non-finite states other than the radius
        are left for :func:`rk4_step` to report.

        """
        sc = self.scenario
        n = self._n_sat_states
        sats = x[:n].reshape(self.n_sats, STATES_PER_SAT)
        r, v, omega, theta = sats[:, 0], sats[:, 1], sats[:, 2], sats[:, 3]
        theta_rel = x[n:]
        if not r.min() > 0:
            check_states(r, v, omega, theta, t)
        a_r, a_theta = self.moon_field.accelerations(r, theta, t)
        y = sc.link_output(theta_rel)
        u = path_coordination(y) if sc.coordination_enabled else self._zero_u
        kc = kc_schedule(t, sc.gains)
        tau_r = radial_thrust_law(r, v, omega, sc.sat_mass, sc.gains,
                                  sc.desired)
        tau_theta = tangential_thrust_law(r, v, omega, sc.sat_mass, sc.gains,
                                          sc.desired, u, kc)
        if outputs or sc.saturation_mode != WARN_ONLY:
            tau_r, tau_theta, over_r, over_theta = saturate_arrays(
                tau_r, tau_theta, sc.tau_max, sc.saturation_mode)
        r_dot, v_dot, omega_dot, theta_dot = planar_rates(
            r, v, omega, tau_r, tau_theta, a_r, a_theta, sc.sat_mass,
            sc.planet.mu)
        dx = np.empty_like(x)
        dsats = dx[:n].reshape(self.n_sats, STATES_PER_SAT)
        dsats[:, 0] = r_dot
        dsats[:, 1] = v_dot
        dsats[:, 2] = omega_dot
        dsats[:, 3] = theta_dot
        np.subtract(omega[:-1], omega[1:], out=dx[n:])
        if not outputs:
            return dx, None
        return dx, StageOutputs(tau_r, tau_theta, u, y, kc, over_r, over_theta)

    def derivative(self, t, x):
        return self.evaluate(t, x, outputs=False)[0]


def system_derivative(x, t, scenario):
    return ClosedLoop(scenario).derivative(t, np.asarray(x, dtype=float))


def rk4_step(f, x, t, dt, k1=None):
    """One classical Runge-Kutta step of ``x' = f(t, x)``.

    ``k1`` may be passed in when the caller already evaluated ``f(t, x)``.
    Only the new state is checked for finiteness; a non-finite result is
    traced back to the first stage that produced it.

    """
    if not dt > 0:
        raise ValueError('dt must be positive, got %r' % (dt,))
    half = 0.5 * dt
    if k1 is None:
        k1 = f(t, x)
    k2 = f(t + half, x + half * k1)
    k3 = f(t + half, x + half * k2)
    k4 = f(t + dt, x + dt * k3)
    x_next = x + dt / 6.0 * (k1 + 2.0 * (k2 + k3) + k4)
    if not np.isfinite(x_next).all():
        for stage, k in enumerate((k1, k2, k3, k4), 1):
            if not np.isfinite(k).all():
                break
        raise IntegrationError('non-finite derivative in RK4 stage %d at '
                               't=%.3f s' % (stage, t), stage, t)
    return x_next


def sample_initial_conditions(spec, n_sats, seed, mass=100.0):
    """Draw the deployment cluster; identical arguments give identical states."""
    rng = np.random.default_rng(seed)
    draws = {}
    for name in ('r', 'v', 'omega', 'theta'):
        nominal, half_width = getattr(spec, name)
        draws[name] = rng.uniform(nominal - half_width, nominal + half_width,
                                  size=n_sats)
    return [SatelliteTruthState(float(draws['r'][i]), float(draws['v'][i]),
                                float(draws['omega'][i]),
                                float(draws['theta'][i]), mass)
            for i in range(n_sats)]


class _Recorder(object):
    """Collects logged rows and turns them into a :class:`TrajectoryLog`."""
    def __init__(self, scenario, equilibrium):
        self.scenario = scenario
        self.equilibrium = equilibrium
        self.n_sats = scenario.n_sats
        self.rows = {name: [] for name in ('t',) + TrajectoryLog.PER_SAT
                     + TrajectoryLog.PER_LINK + TrajectoryLog.PER_STEP}

    def record(self, t, x, out):
        sc = self.scenario
        r, v, omega, theta, theta_rel = unpack_state(x, self.n_sats)
        kc_dot = kc_rate(t, sc.gains)
        sample = analysis.lyapunov(omega, theta_rel, self.equilibrium, t,
                                   sc.gains, sc.link_output)
        values = {
            't': t, 'r': r, 'v': v, 'omega': omega, 'theta': theta,
            'tau_r': out.tau_r, 'tau_theta': out.tau_theta, 'u': out.u,
            'theta_rel': theta_rel, 'y': out.y, 'kc': out.kc,
            'kc_dot': kc_dot, 'V': sample.V,
            'V_dot': analysis.lyapunov_rate(omega, r, self.equilibrium,
                                            sc.gains, out.kc, kc_dot),
        }
        for name, value in values.items():
            self.rows[name].append(np.array(value, dtype=float, copy=True))

    def log(self):
        columns = {}
        n_links = self.n_sats - 1
        for name, rows in self.rows.items():
            if name in TrajectoryLog.PER_SAT:
                shape = (0, self.n_sats)
            elif name in TrajectoryLog.PER_LINK:
                shape = (0, n_links)
            else:
                shape = (0,)
            columns[name] = np.array(rows) if rows else np.empty(shape)
        return TrajectoryLog(**columns)


def lyapunov_monotone(V, tol=MONOTONE_TOL):
    """True when ``V`` never grows by more than ``tol * max(V[0], 1)``."""
    V = np.asarray(V)
    if V.size < 2:
        return True
    return bool(np.all(np.diff(V) <= tol * max(V[0], 1.0)))


def detect_acquisition(log, tol_deg=0.5, spacing=None):
    """First logged time after which every spacing stays within ``tol_deg``.

    Returns ``None`` when the constellation is not acquired by the end of
    the log.

    """
    if len(log) == 0:
        raise ValueError('cannot detect acquisition on an empty log')
    if spacing is None:
        spacing = 2.0 * math.pi / log.n_sats
    error = np.abs(np.degrees(log.theta_rel) - math.degrees(spacing))
    within = (error <= tol_deg).all(axis=1)
    if not within[-1]:
        return None
    outside = np.flatnonzero(~within)
    if outside.size == 0:
        return float(log.t[0])
    return float(log.t[outside[-1] + 1])


def build_report(log, scenario, equilibrium, max_abs_tau, saturation_events,
                 abort_reason=None):
    if len(log):
        t_acq = detect_acquisition(log, scenario.acquisition_tol_deg,
                                   float(equilibrium.theta_rel_bar[0]))
        spacing_err = np.degrees(log.theta_rel[-1] - equilibrium.theta_rel_bar)
        omega_err = log.omega[-1] - equilibrium.omega_bar
        r_err = log.r[-1] - equilibrium.r_bar
    else:
        t_acq = None
        spacing_err = omega_err = r_err = np.empty(0)
    monotone = None if scenario.moons_enabled else lyapunov_monotone(log.V)
    return AcquisitionReport(
        t_acq=t_acq,
        final_spacing_err_deg=spacing_err.tolist(),
        final_omega_err=omega_err.tolist(),
        final_r_err=r_err.tolist(),
        max_abs_tau_r=float(max_abs_tau[0]),
        max_abs_tau_theta=float(max_abs_tau[1]),
        saturation_events=int(saturation_events),
        lyapunov_monotone=monotone,
        aborted=abort_reason is not None,
        abort_reason=abort_reason)


def initial_state(scenario):
    states = sample_initial_conditions(scenario.ic_spec, scenario.n_sats,
                                       scenario.seed, scenario.sat_mass)
    theta = [s.theta for s in states]
    return pack_state(states, initial_link_angles(theta))


def run(scenario):
    """Integrate ``scenario`` over its horizon.

    Returns ``(log, report)``. A run that leaves the model's domain stops
    early with the rows logged so far and an aborted report.

    """
    system = ClosedLoop(scenario)
    equilibrium = analysis.compute_equilibrium(
        scenario.desired, system.topology, scenario.link_output)
    recorder = _Recorder(scenario, equilibrium)
    dt, stride, n_steps = scenario.dt, scenario.log_stride, scenario.n_steps
    logger.info('Simulating %d satellites for %.2f Sols (%d steps of %g s, '
                'moons %s)', scenario.n_sats, scenario.horizon / SOL, n_steps,
                dt, 'on' if system.moons else 'off')

    max_abs_tau = [0.0, 0.0]
    saturation_events = 0
    abort_reason = None
    phase = ACQUISITION
    x = initial_state(scenario)
    try:
        for step in range(n_steps + 1):
            t = step * dt
            dx, out = system.evaluate(t, x)
            max_abs_tau[0] = max(max_abs_tau[0], float(np.abs(out.tau_r).max()))
            max_abs_tau[1] = max(max_abs_tau[1],
                                 float(np.abs(out.tau_theta).max()))
            events = int(out.over_r.sum() + out.over_theta.sum())
            if events:
                if not saturation_events:
                    logger.warning('Thrust exceeds %g N at t=%.1f s (%s mode)',
                                   scenario.tau_max, t,
                                   scenario.saturation_mode)
                saturation_events += events
            step_phase = kc_phase(t, scenario.gains)
            if step_phase != phase:
                phase = step_phase
                logger.debug('Entering %s phase at t=%.1f s', phase, t)
            if step % stride == 0:
                recorder.record(t, x, out)
            if step == n_steps:
                break
            x = rk4_step(system.derivative, x, t, dt, k1=dx)
    except (DynamicsError, IntegrationError) as e:
        abort_reason = str(e)
        logger.error('Run aborted: %s', e)

    log = recorder.log()
    report = build_report(log, scenario, equilibrium, max_abs_tau,
                          saturation_events, abort_reason)
    if report.acquired:
        logger.info('Constellation acquired at %.2f Sols', report.t_acq_sols)
    elif not report.aborted:
        logger.warning('Constellation not acquired within %.2f Sols',
                       scenario.horizon / SOL)
    return log, report


def certification_scenario(scenario, horizon=SOL, with_moons=False):
    """Short run logged at every step, as needed for certification."""
    return replace(scenario, horizon=horizon, logging_interval=scenario.dt,
                   moons_enabled=with_moons and scenario.moons_enabled)
