""":mod:`areosync.network` --- Communication links and interconnection

Satellites talk only to their neighbours along a path graph. Link ``l``
connects satellite ``l`` (positive end, ahead in the direction of orbital
motion) to satellite ``l + 1``. Each link integrates the relative angle
between its two satellites and publishes ``y_l = h(theta_rel_l)``; the
satellites receive ``u = -D y`` and the links receive ``e = D^T omega``.

"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

AFFINE = 'affine'
CUBIC = 'cubic'
CUSTOM = 'custom'
OUTPUT_KINDS = (AFFINE, CUBIC, CUSTOM)


class TopologyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Topology:
    n_sats: int
    n_links: int
    incidence: np.ndarray

    def __post_init__(self):
        self.incidence.setflags(write=False)


@dataclass(frozen=True)
class LinkOutputFn:
    """Strictly increasing, onto output map of a link.

    ``affine`` is ``theta - theta_rel_d``; ``cubic`` is
    ``theta**3 + theta - theta_rel_d**3 - theta_rel_d``; ``custom`` calls
    ``func``, which must itself be strictly increasing and onto.

    """
    kind: str = AFFINE
    theta_rel_d: float = 0.0
    func: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in OUTPUT_KINDS:
            raise ValueError('unknown link output kind %r' % (self.kind,))
        if self.kind == CUSTOM and self.func is None:
            raise ValueError('custom link output needs a function')

    @classmethod
    def affine(cls, n_sats):
        return cls(AFFINE, 2.0 * math.pi / n_sats)

    @classmethod
    def cubic(cls, n_sats):
        return cls(CUBIC, 2.0 * math.pi / n_sats)

    @property
    def is_affine(self):
        return self.kind == AFFINE

    def __call__(self, theta_rel):
        d = self.theta_rel_d
        if self.kind == AFFINE:
            return theta_rel - d
        if self.kind == CUBIC:
            return theta_rel ** 3 + theta_rel - (d ** 3 + d)
        if np.ndim(theta_rel) == 0:
            return float(self.func(theta_rel))
        return np.array([self.func(x) for x in theta_rel], dtype=float)


@dataclass
class LinkState:
    theta_rel: float
    output_fn: LinkOutputFn


def build_path_incidence(n_sats):
    """Incidence matrix of the path graph over ``n_sats`` satellites."""
    if int(n_sats) != n_sats or n_sats < 2:
        raise TopologyError('a constellation needs at least 2 satellites, '
                            'got %r' % (n_sats,))
    n_sats = int(n_sats)
    n_links = n_sats - 1
    incidence = np.zeros((n_sats, n_links))
    links = np.arange(n_links)
    incidence[links, links] = 1.0
    incidence[links + 1, links] = -1.0
    return Topology(n_sats, n_links, incidence)


def _check_length(values, expected, what):
    values = np.asarray(values, dtype=float)
    if values.shape != (expected,):
        raise TopologyError('expected %d %s, got shape %s'
                            % (expected, what, values.shape))
    return values


def link_inputs(omega, topo):
    """``e = D^T omega``: rate of change of every relative angle."""
    omega = _check_length(omega, topo.n_sats, 'angular velocities')
    return topo.incidence.T @ omega


def link_output(link):
    return link.output_fn(link.theta_rel)


def link_outputs(theta_rel, output_fn):
    return output_fn(np.asarray(theta_rel, dtype=float))


def coordination_vector(y, topo):
    """``u = -D y``; ``u_i`` only sees the links incident to satellite ``i``."""
    y = _check_length(y, topo.n_links, 'link outputs')
    return -(topo.incidence @ y)


def link_derivative(link, e_l):
    return e_l


def path_link_inputs(omega):
    """``D^T omega`` for the path graph, by slicing instead of a matrix product."""
    return omega[:-1] - omega[1:]


def path_coordination(y):
    """``-D y`` for the path graph; equal to :func:`coordination_vector`."""
    u = np.zeros(len(y) + 1)
    u[:-1] -= y
    u[1:] += y
    return u


def initial_link_angles(theta):
    """Relative angles of the links from the satellites' own angles."""
    theta = np.asarray(theta, dtype=float)
    return theta[:-1] - theta[1:]


def interconnection_matrix(topo):
    """The skew-symmetric coupling ``[[0, -D], [D^T, 0]]``."""
    d = topo.incidence
    return np.block([[np.zeros((topo.n_sats, topo.n_sats)), -d],
                     [d.T, np.zeros((topo.n_links, topo.n_links))]])


def power_balance(omega, y, omega_bar, y_bar, topo):
    """Both cross terms of the interconnection supply.

    Returns ``((omega - omega_bar)^T (u - u_bar), (e - e_bar)^T (y - y_bar))``,
    which cancel for any arguments.

    """
    omega = _check_length(omega, topo.n_sats, 'angular velocities')
    omega_bar = _check_length(omega_bar, topo.n_sats, 'angular velocities')
    y = _check_length(y, topo.n_links, 'link outputs')
    y_bar = _check_length(y_bar, topo.n_links, 'link outputs')
    u = coordination_vector(y, topo)
    u_bar = coordination_vector(y_bar, topo)
    e = link_inputs(omega, topo)
    e_bar = link_inputs(omega_bar, topo)
    return float((omega - omega_bar) @ (u - u_bar)), float((e - e_bar) @ (y - y_bar))
