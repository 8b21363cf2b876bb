""":mod:`areosync.config` --- Scenario configuration documents

A configuration is a JSON object. Physical quantities carry their unit in the
key name (``r_d_km`` or ``r_d_m``, ``horizon_sols`` or ``horizon_s``) and are
converted to SI on the way in; omitted keys take the values in
:data:`DEFAULTS`. Unknown keys are rejected, and every problem found is
reported at once through :class:`ConfigError`.

"""
import json
import math
from dataclasses import dataclass
from typing import Optional

from .controller import (RADIAL_CONVENTIONS, SATURATION_MODES,
                         SPECIFIC_FORCE, WARN_ONLY, DesiredOrbit, GainSet)
from .dynamics import (CONSTANT_SETS, MIN_MOON_SEPARATION, SOL, MoonModel,
                       PlanetModel)
from .engine import InitialConditionSpec, Scenario
from .network import AFFINE, CUBIC, LinkOutputFn

UNITS = {
    'm': 1.0, 'km': 1e3,
    's': 1.0, 'sols': SOL,
    'rad': 1.0, 'deg': math.pi / 180.0,
    'kg': 1.0, 'N': 1.0, 'm3ps2': 1.0, 'mps': 1.0, 'radps': 1.0,
}

# Quantity name -> accepted unit suffixes, SI first.
QUANTITIES = {
    'r_d': ('m', 'km'),
    'planet_mu': ('m3ps2',),
    'equatorial_radius': ('m', 'km'),
    'min_moon_separation': ('m', 'km'),
    'sat_mass': ('kg',),
    'tau_max': ('N',),
    't_f': ('s', 'sols'),
    'horizon': ('s', 'sols'),
    'dt': ('s',),
    'logging_interval': ('s',),
}
MOON_QUANTITIES = {
    'mu': ('m3ps2',),
    'orbit_radius': ('m', 'km'),
    'initial_phase': ('rad', 'deg'),
}
IC_QUANTITIES = {
    'r': ('m', 'km'),
    'v': ('mps',),
    'omega': ('radps',),
    'theta': ('rad', 'deg'),
}
GAIN_KEYS = ('k_r', 'k_v', 'k_omega', 'kc_bar', 'kc_floor', 'c')
BOOL_KEYS = ('moons_enabled', 'coordination_enabled')
OUTPUT_FILES = ('trajectory_csv', 'links_csv', 'report_json',
                'certification_json', 'plot_csv')
PLAIN_KEYS = (('constant_set', 'n_sats', 'seed', 'radial_gain_convention',
               'saturation_mode', 'link_output', 'moons', 'initial_conditions',
               'out_dir', 'plot_stride', 'acquisition_tol_deg')
              + GAIN_KEYS + BOOL_KEYS + OUTPUT_FILES)
POSITIVE = ('r_d', 'planet_mu', 'min_moon_separation', 'sat_mass', 'tau_max',
            't_f', 'dt', 'logging_interval', 'acquisition_tol_deg') + GAIN_KEYS

DEFAULTS = {
    'constant_set': 'mars-example',
    'n_sats': 10,
    'sat_mass': 100.0,
    'r_d': 20428.2e3,
    'min_moon_separation': MIN_MOON_SEPARATION,
    'moons_enabled': True,
    'k_r': 1e-5,
    'k_v': 1e-4,
    'k_omega': 1e4,
    'kc_bar': 1e11,
    'kc_floor': 1e9,
    'c': 30.0,
    't_f': 355 * SOL,
    'radial_gain_convention': SPECIFIC_FORCE,
    'tau_max': 0.1,
    'saturation_mode': WARN_ONLY,
    'link_output': AFFINE,
    'coordination_enabled': True,
    'dt': 10.0,
    'horizon': 355 * SOL,
    'logging_interval': 1000.0,
    'seed': 0,
    'acquisition_tol_deg': 0.5,
    'plot_stride': 10,
    'trajectory_csv': 'trajectory.csv',
    'links_csv': 'links.csv',
    'report_json': 'report.json',
    'certification_json': 'certification.json',
    'plot_csv': 'plot_data.csv',
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(key, message)`` pairs."""
    def __init__(self, errors):
        self.errors = list(errors)
        lines = ['%s: %s' % (key, message) for key, message in self.errors]
        super(ConfigError, self).__init__(
            'invalid configuration:\n  ' + '\n  '.join(lines))


@dataclass(frozen=True)
class OutputSettings:
    out_dir: Optional[str] = None
    plot_stride: int = DEFAULTS['plot_stride']
    trajectory_csv: str = DEFAULTS['trajectory_csv']
    links_csv: str = DEFAULTS['links_csv']
    report_json: str = DEFAULTS['report_json']
    certification_json: str = DEFAULTS['certification_json']
    plot_csv: str = DEFAULTS['plot_csv']


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class _Reader(object):
    """Pulls typed, unit-converted values out of one JSON object."""
    def __init__(self, document, quantities, plain, prefix=''):
        self.document = document
        self.quantities = quantities
        self.prefix = prefix
        self.errors = []
        allowed = set(plain)
        for name, units in quantities.items():
            allowed.update('%s_%s' % (name, unit) for unit in units)
        for key in sorted(document):
            if key not in allowed:
                self.error(key, 'unknown key')

    def error(self, key, message):
        self.errors.append((self.prefix + key, message))

    def quantity(self, name, default=None):
        """SI value of ``name``, whichever unit suffix it was given with."""
        given = ['%s_%s' % (name, unit) for unit in self.quantities[name]
                 if '%s_%s' % (name, unit) in self.document]
        if not given:
            return default
        if len(given) > 1:
            self.error(given[0], 'give only one of %s' % ', '.join(given))
            return default
        key = given[0]
        value = self.document[key]
        if not (_is_number(value) and math.isfinite(value)):
            self.error(key, 'must be a finite number')
            return default
        return value * UNITS[key[len(name) + 1:]]

    def pair(self, name, default):
        """``[nominal, half_width]`` pair converted to SI."""
        given = ['%s_%s' % (name, unit) for unit in self.quantities[name]
                 if '%s_%s' % (name, unit) in self.document]
        if not given:
            return default
        key = given[0]
        value = self.document[key]
        if len(given) > 1:
            self.error(key, 'give only one of %s' % ', '.join(given))
        elif not (isinstance(value, list) and len(value) == 2
                  and all(_is_number(x) and math.isfinite(x) for x in value)):
            self.error(key, 'must be [nominal, half_width]')
        else:
            scale = UNITS[key[len(name) + 1:]]
            return (value[0] * scale, value[1] * scale)
        return default

    def plain(self, key, default, kind):
        value = self.document.get(key, default)
        if kind is bool:
            ok = isinstance(value, bool)
        elif kind is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif kind is float:
            ok = _is_number(value) and math.isfinite(value)
        else:
            ok = isinstance(value, kind)
        if not ok:
            self.error(key, 'must be of type %s' % kind.__name__)
            return default
        return float(value) if kind is float else value


def _read_moons(reader, entries, planet, known):
    if not isinstance(entries, list):
        reader.error('moons', 'must be a list of moon objects')
        return [], []
    moons, errors = [], []
    for i, entry in enumerate(entries):
        prefix = 'moons[%d].' % i
        if not isinstance(entry, dict):
            errors.append((prefix[:-1], 'must be an object'))
            continue
        moon = _Reader(entry, MOON_QUANTITIES, ('name',), prefix)
        name = moon.plain('name', None, str)
        base = known.get(name, {})
        mu = moon.quantity('mu', base.get('mu_p'))
        radius = moon.quantity('orbit_radius', base.get('orbit_radius'))
        phase = moon.quantity('initial_phase', 0.0)
        if mu is None or radius is None:
            moon.error('name', 'unknown moon %r needs mu and orbit_radius'
                       % (name,))
        elif not (mu >= 0 and radius > 0):
            moon.error('mu', 'needs mu >= 0 and orbit_radius > 0')
        elif planet is not None:
            moons.append(MoonModel.about(planet, name, mu, radius, phase))
        errors.extend(moon.errors)
    return moons, errors


def load_config(text):
    """Parse a configuration document into ``(Scenario, OutputSettings)``."""
    try:
        document = json.loads(text)
    except ValueError as e:
        raise ConfigError([('<document>', 'not valid JSON (%s)' % e)])
    if not isinstance(document, dict):
        raise ConfigError([('<document>', 'must be a JSON object')])
    return from_document(document)


def parse_config(text):
    return load_config(text)[0]


def from_document(document):
    reader = _Reader(document, QUANTITIES, PLAIN_KEYS)
    get = reader.plain
    set_name = get('constant_set', DEFAULTS['constant_set'], str)
    constants = CONSTANT_SETS.get(set_name)
    if constants is None:
        reader.error('constant_set', 'unknown constant set %r' % (set_name,))
        constants = CONSTANT_SETS[DEFAULTS['constant_set']]

    q = {name: reader.quantity(name, DEFAULTS.get(name)) for name in QUANTITIES}
    if q['planet_mu'] is None:
        q['planet_mu'] = constants['planet']['mu']
    if q['equatorial_radius'] is None:
        q['equatorial_radius'] = constants['planet']['equatorial_radius']
    values = {key: get(key, DEFAULTS[key], float)
              for key in GAIN_KEYS + ('acquisition_tol_deg',)}
    values.update(q)
    for name in POSITIVE:
        if values[name] is not None and not values[name] > 0:
            reader.error(name, 'must be positive, got %r' % (values[name],))
    if not values['kc_bar'] > values['kc_floor']:
        reader.error('kc_bar', 'must be greater than kc_floor')
    if not values['horizon'] >= 0:
        reader.error('horizon', 'must not be negative')

    n_sats = get('n_sats', DEFAULTS['n_sats'], int)
    if n_sats < 2:
        reader.error('n_sats', 'must be at least 2')
    seed = get('seed', DEFAULTS['seed'], int)
    if not 0 <= seed < 2 ** 64:
        reader.error('seed', 'must be a 64-bit unsigned integer')
    convention = get('radial_gain_convention',
                     DEFAULTS['radial_gain_convention'], str)
    if convention not in RADIAL_CONVENTIONS:
        reader.error('radial_gain_convention',
                     'must be one of %s' % ', '.join(RADIAL_CONVENTIONS))
    saturation_mode = get('saturation_mode', DEFAULTS['saturation_mode'], str)
    if saturation_mode not in SATURATION_MODES:
        reader.error('saturation_mode',
                     'must be one of %s' % ', '.join(SATURATION_MODES))
    output_kind = get('link_output', DEFAULTS['link_output'], str)
    if output_kind not in (AFFINE, CUBIC):
        reader.error('link_output', 'must be %s or %s' % (AFFINE, CUBIC))
    flags = {key: get(key, DEFAULTS[key], bool) for key in BOOL_KEYS}
    plot_stride = get('plot_stride', DEFAULTS['plot_stride'], int)
    if plot_stride < 1:
        reader.error('plot_stride', 'must be at least 1')
    out_dir = document.get('out_dir')
    if out_dir is not None and not isinstance(out_dir, str):
        reader.error('out_dir', 'must be a string')
    files = {key: get(key, DEFAULTS[key], str) for key in OUTPUT_FILES}

    ic_document = document.get('initial_conditions', {})
    ic_values = {}
    if not isinstance(ic_document, dict):
        reader.error('initial_conditions', 'must be an object')
        ic_document = {}
    ic = _Reader(ic_document, IC_QUANTITIES, (), 'initial_conditions.')
    for name in IC_QUANTITIES:
        ic_values[name] = ic.pair(name, getattr(InitialConditionSpec, name))
    errors = reader.errors + ic.errors

    planet = None
    if values['planet_mu'] > 0 and values['equatorial_radius'] >= 0:
        planet = PlanetModel(values['planet_mu'], values['equatorial_radius'],
                             constants['planet']['name'])
    known = {m['name']: m for m in constants['moons']}
    moons_document = document.get('moons', constants['moons'])
    if 'moons' in document:
        moons, moon_errors = _read_moons(reader, moons_document, planet, known)
        errors += moon_errors
    elif planet is not None:
        moons = [MoonModel.about(planet, m['name'], m['mu_p'],
                                 m['orbit_radius']) for m in constants['moons']]
    else:
        moons = []
    errors += [e for e in reader.errors if e not in errors]
    if errors:
        raise ConfigError(errors)

    try:
        link_output = (LinkOutputFn.cubic(n_sats) if output_kind == CUBIC
                       else LinkOutputFn.affine(n_sats))
        scenario = Scenario(
            planet=planet,
            desired=DesiredOrbit.for_planet(planet, values['r_d']),
            moons=tuple(moons),
            n_sats=n_sats,
            sat_mass=values['sat_mass'],
            gains=GainSet(radial_convention=convention,
                          t_f=values['t_f'],
                          **{key: values[key] for key in GAIN_KEYS}),
            ic_spec=InitialConditionSpec(**ic_values),
            dt=values['dt'],
            horizon=values['horizon'],
            seed=seed,
            moons_enabled=flags['moons_enabled'],
            saturation_mode=saturation_mode,
            tau_max=values['tau_max'],
            logging_interval=values['logging_interval'],
            link_output=link_output,
            coordination_enabled=flags['coordination_enabled'],
            min_moon_separation=values['min_moon_separation'],
            acquisition_tol_deg=values['acquisition_tol_deg'])
    except ValueError as e:
        raise ConfigError([('<scenario>', str(e))])
    return scenario, OutputSettings(out_dir, plot_stride, **files)


def serialize_config(scenario, output=None):
    """SI-keyed document that parses back to an equal scenario."""
    gains = scenario.gains
    document = {
        'constant_set': DEFAULTS['constant_set'],
        'n_sats': scenario.n_sats,
        'sat_mass_kg': scenario.sat_mass,
        'r_d_m': scenario.desired.r_d,
        'planet_mu_m3ps2': scenario.planet.mu,
        'equatorial_radius_m': scenario.planet.equatorial_radius,
        'moons': [{'name': m.name, 'mu_m3ps2': m.mu_p,
                   'orbit_radius_m': m.orbit_radius,
                   'initial_phase_rad': m.initial_phase}
                  for m in scenario.moons],
        'moons_enabled': scenario.moons_enabled,
        'min_moon_separation_m': scenario.min_moon_separation,
        't_f_s': gains.t_f,
        'radial_gain_convention': gains.radial_convention,
        'tau_max_N': scenario.tau_max,
        'saturation_mode': scenario.saturation_mode,
        'link_output': scenario.link_output.kind,
        'coordination_enabled': scenario.coordination_enabled,
        'initial_conditions': {
            'r_m': list(scenario.ic_spec.r),
            'v_mps': list(scenario.ic_spec.v),
            'omega_radps': list(scenario.ic_spec.omega),
            'theta_rad': list(scenario.ic_spec.theta),
        },
        'dt_s': scenario.dt,
        'horizon_s': scenario.horizon,
        'logging_interval_s': scenario.logging_interval,
        'seed': scenario.seed,
        'acquisition_tol_deg': scenario.acquisition_tol_deg,
    }
    document.update((key, getattr(gains, key)) for key in GAIN_KEYS)
    if output is not None:
        if output.out_dir is not None:
            document['out_dir'] = output.out_dir
        document['plot_stride'] = output.plot_stride
        document.update((key, getattr(output, key)) for key in OUTPUT_FILES)
    return document


def override(document, key, value):
    """Copy of ``document`` with ``key`` set, dropping other units of it."""
    document = dict(document)
    for name, units in QUANTITIES.items():
        if any(key == '%s_%s' % (name, unit) for unit in units):
            for unit in units:
                document.pop('%s_%s' % (name, unit), None)
    document[key] = value
    return document
