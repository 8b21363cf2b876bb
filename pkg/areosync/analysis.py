""":mod:`areosync.analysis` --- Equilibrium, storage functions and certificates

Everything in here is a monitor: it reads states (or a logged trajectory)
and reports, it never feeds back into the simulation.

Storage functions, with ``d_omega = omega - omega_bar``::

    S_i = k_c(t) / 2 * d_omega_i**2
    T_l = integral of h(z) - h(theta_bar) from theta_bar to theta_rel_l
    V   = sum(S) + sum(T)

Along the nominal closed loop the satellite and link supplies cancel through
the skew-symmetric interconnection, leaving::

    V_dot = -k_c k_omega sum(d_omega**2 / r) + k_c_dot / 2 * sum(d_omega**2)

"""
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import integrate, linalg, optimize

from .controller import kc_rate, kc_schedule
from .network import link_inputs

logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-13
MAX_BRACKET_EXPANSIONS = 200
COARSE_LOG_INTERVAL = 60.0
CERTIFY_SAFETY = 10.0
SATELLITE = 'satellite'
LINK = 'link'


class EquilibriumError(RuntimeError):
    pass


class StorageError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EquilibriumPoint:
    r_bar: float
    v_bar: float
    omega_bar: float
    theta_rel_bar: np.ndarray


@dataclass(frozen=True, eq=False)
class StorageSample:
    S: np.ndarray
    T: np.ndarray
    V: float
    V_lower: float
    V_upper: float
    t: float


@dataclass(frozen=True)
class PassivityResidual:
    kind: str
    index: int
    t: float
    supply: float
    storage_rate: float
    slack: float
    epsilon_used: float
    tol: float

    @property
    def violated(self):
        return self.slack < -self.tol


@dataclass
class CertificationSummary:
    """Per-kind outcome of :func:`certify_passivity`."""
    kind: str
    checked: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    curvature_constant: float = 0.0
    epsilon: List[float] = field(default_factory=list)

    def as_dict(self):
        eps = np.asarray(self.epsilon, dtype=float)
        return {
            'checked': self.checked,
            'violations': self.violations,
            'worst_slack': None if self.checked == 0 else self.worst_slack,
            'curvature_constant': self.curvature_constant,
            'epsilon_min': float(eps.min()) if eps.size else None,
            'epsilon_mean': float(eps.mean()) if eps.size else None,
            'epsilon_max': float(eps.max()) if eps.size else None,
        }


def _expand_bracket(h, low, high):
    f_low, f_high = h(low), h(high)
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if f_low <= 0 <= f_high:
            return low, high
        width = high - low
        if f_low > 0:
            low -= width
            f_low = h(low)
        if f_high < 0:
            high += width
            f_high = h(high)
    raise EquilibriumError('could not bracket a root of the link output in '
                           '[%g, %g]; is it strictly increasing and onto?'
                           % (low, high))


def solve_link_equilibrium(h, bracket=None):
    """Root of ``h``: the relative angle each link settles at."""
    if h.is_affine:
        return h.theta_rel_d
    if bracket is None:
        bracket = (h.theta_rel_d - 1.0, h.theta_rel_d + 1.0)
    low, high = _expand_bracket(h, *bracket)
    try:
        return optimize.bisect(h, low, high, xtol=ROOT_XTOL, maxiter=500)
    except (RuntimeError, ValueError) as e:
        raise EquilibriumError('link equilibrium did not converge (%s)' % e)


def compute_equilibrium(desired, topo, h, bracket=None):
    theta_bar = solve_link_equilibrium(h, bracket)
    return EquilibriumPoint(desired.r_d, desired.v_d, desired.omega_d,
                            np.full(topo.n_links, theta_bar))


def satellite_storage(omega, omega_bar, k_c_t):
    return 0.5 * k_c_t * (np.asarray(omega) - omega_bar) ** 2


def link_storage(theta_rel, theta_rel_bar, h):
    """Link storage; closed form for the affine output, quadrature otherwise."""
    if h.is_affine:
        return 0.5 * (np.asarray(theta_rel) - theta_rel_bar) ** 2
    if np.ndim(theta_rel) > 0:
        bars = np.broadcast_to(theta_rel_bar, np.shape(theta_rel))
        return np.array([link_storage(x, b, h) for x, b in
                         zip(np.ravel(theta_rel), np.ravel(bars))])
    h_bar = h(theta_rel_bar)
    result = integrate.quad(lambda z: h(z) - h_bar, theta_rel_bar, theta_rel,
                            epsabs=0.0, epsrel=1e-12, full_output=1)
    if len(result) > 3:
        raise StorageError('link storage quadrature failed from %r to %r: %s'
                           % (theta_rel_bar, theta_rel, result[3]))
    return result[0]


def lyapunov(omega, theta_rel, eq, t, gains, h):
    """Total storage ``V`` at time ``t`` together with its time-free bounds."""
    S = satellite_storage(omega, eq.omega_bar, kc_schedule(t, gains))
    T = link_storage(theta_rel, eq.theta_rel_bar, h)
    d2 = float(np.sum((np.asarray(omega) - eq.omega_bar) ** 2))
    link_total = float(np.sum(T))
    return StorageSample(
        S=S, T=T, V=float(np.sum(S)) + link_total,
        V_lower=0.5 * gains.kc_floor * d2 + link_total,
        V_upper=0.5 * gains.kc_bar * d2 + link_total, t=t)


def _weighted_deviation(omega, eq, r):
    d_omega = np.asarray(omega) - eq.omega_bar
    return float(np.sum(d_omega ** 2 / np.asarray(r)))


def lyapunov_rate(omega, r, eq, gains, kc, kc_dot):
    if not (np.asarray(r) > 0).all():
        raise ValueError('lyapunov_rate needs positive radii')
    d2 = float(np.sum((np.asarray(omega) - eq.omega_bar) ** 2))
    return -kc * gains.k_omega * _weighted_deviation(omega, eq, r) + 0.5 * kc_dot * d2


def barbalat_W(omega, eq, r, gains):
    """Time-free bound ``W <= 0`` with ``V_dot <= W`` along the closed loop."""
    return -gains.kc_floor * gains.k_omega * _weighted_deviation(omega, eq, r)


def radial_eigen_check(k_r, k_v):
    """Roots of ``s**2 + k_v s + k_r`` and whether both lie in the left half plane."""
    disc = k_v * k_v - 4.0 * k_r
    if disc < 0:
        half = 0.5 * math.sqrt(-disc)
        roots = np.array([complex(-0.5 * k_v, half), complex(-0.5 * k_v, -half)])
    else:
        root = math.sqrt(disc)
        q = -0.5 * (k_v + root) if k_v >= 0 else -0.5 * (k_v - root)
        roots = np.array([q, k_r / q if q != 0 else 0.0], dtype=complex)
    return bool((roots.real < 0).all()), roots


def radial_analytic_solution(dr0, v0, k_r, k_v, times):
    """``(r - r_d, v)`` of the radial closed loop at ``times``, via ``expm``."""
    a = np.array([[0.0, 1.0], [-k_r, -k_v]])
    x0 = np.array([dr0, v0], dtype=float)
    out = np.array([linalg.expm(a * t) @ x0 for t in np.atleast_1d(times)])
    return out[:, 0], out[:, 1]


def _third_derivative_bound(series, step):
    """Largest ``|f'''|`` seen by the five-point stencil along each column."""
    if series.shape[0] < 5:
        return np.zeros(series.shape[1:])
    stencil = (series[4:] - 2.0 * series[3:-1] + 2.0 * series[1:-3]
               - series[:-4]) / (2.0 * step ** 3)
    return np.abs(stencil).max(axis=0)


def _certify_block(kind, t, storage, sensitivity, supply, epsilon, step,
                   safety):
    rate = (storage[2:] - storage[:-2]) / (2.0 * step)
    supply = supply[1:-1]
    epsilon = epsilon[1:-1]
    curvature = _third_derivative_bound(storage, step) / 6.0
    # storage is only as exact as the rounded state it is computed from
    roundoff = 64.0 * np.finfo(float).eps * (
        (np.abs(storage).max(axis=0) + np.abs(sensitivity).max(axis=0)) / step
        + np.abs(supply).max(axis=0))
    tol = safety * curvature * step ** 2 + roundoff
    slack = supply - rate
    summary = CertificationSummary(kind)
    summary.curvature_constant = float(safety * curvature.max())
    residuals = []
    for k in range(slack.shape[0]):
        for index in range(slack.shape[1]):
            residual = PassivityResidual(
                kind, index, float(t[k + 1]), float(supply[k, index]),
                float(rate[k, index]), float(slack[k, index]),
                float(epsilon[k, index]), float(tol[index]))
            residuals.append(residual)
            summary.checked += 1
            summary.worst_slack = min(summary.worst_slack, residual.slack)
            summary.epsilon.append(residual.epsilon_used)
            if residual.violated:
                summary.violations += 1
    return residuals, summary


def certify_passivity(log, eq, gains, h, topo):
    """Check the dissipation inequality of every subsystem along ``log``.

    Satellites are checked against the output-strict supply
    ``(u - u_bar)(omega - omega_bar) - eps_i (omega - omega_bar)**2`` with
    ``eps_i = k_c k_omega / r_i - k_c_dot / 2``; links against
    ``(e - e_bar)(y - y_bar)``. Storage rates are centred differences at the
    logging interval, so the tolerance is ``C * dt**2`` with ``C`` estimated
    from the third derivative of each storage along the trajectory, plus a
    rounding allowance for the storage and supply values themselves.

    Returns the residuals and a ``{kind: CertificationSummary}`` mapping.

    """
    t = np.asarray(log.t)
    if t.size < 3:
        raise ValueError('certification needs at least 3 logged samples, '
                         'got %d' % t.size)
    step = float(t[1] - t[0])
    safety = CERTIFY_SAFETY
    if step > COARSE_LOG_INTERVAL:
        safety *= 10.0
        logger.warning('Trajectory logged every %.1f s is coarse for '
                       'certification, widening the tolerance', step)

    kc = np.array([kc_schedule(x, gains) for x in t])
    kc_dot = np.array([kc_rate(x, gains) for x in t])
    d_omega = log.omega - eq.omega_bar
    storage = 0.5 * kc[:, None] * d_omega ** 2
    epsilon = kc[:, None] * gains.k_omega / log.r - 0.5 * kc_dot[:, None]
    u_bar = 0.0
    supply = (log.u - u_bar) * d_omega - epsilon * d_omega ** 2
    sensitivity = kc[:, None] * np.abs(d_omega * log.omega)
    sat_residuals, sat_summary = _certify_block(
        SATELLITE, t, storage, sensitivity, supply, epsilon, step, safety)

    e = np.array([link_inputs(row, topo) for row in log.omega])
    e_bar = 0.0
    y_bar = h(eq.theta_rel_bar)
    link_store = np.array([link_storage(row, eq.theta_rel_bar, h)
                           for row in log.theta_rel])
    link_store = link_store.reshape(t.size, topo.n_links)
    link_supply = (e - e_bar) * (log.y - y_bar)
    link_sensitivity = np.abs((log.y - y_bar) * log.theta_rel)
    link_residuals, link_summary = _certify_block(
        LINK, t, link_store, link_sensitivity, link_supply,
        np.zeros_like(link_supply), step, safety)

    summaries = {SATELLITE: sat_summary, LINK: link_summary}
    for summary in summaries.values():
        if summary.violations:
            logger.warning('%d of %d %s residuals violate the supply rate '
                           '(worst slack %.3e)', summary.violations,
                           summary.checked, summary.kind, summary.worst_slack)
    return sat_residuals + link_residuals, summaries
