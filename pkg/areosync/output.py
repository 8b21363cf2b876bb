""":mod:`areosync.output` --- Run artifacts

Trajectory and link CSVs, the acquisition report, the certification report
and downsampled plot data. Numbers are printed with 17 significant digits so
they read back exactly; every file is written to a temporary sibling and
renamed into place.

"""
import csv
import json
import logging
import math
import os
import tempfile
from contextlib import contextmanager

import numpy as np

from .dynamics import wrap_angle

logger = logging.getLogger(__name__)

TRAJECTORY_HEADER = ('t_s', 'sat_id', 'r_m', 'v_mps', 'omega_radps',
                     'theta_rad', 'tau_r_N', 'tau_theta_N', 'u_i')
LINK_HEADER = ('t_s', 'link_id', 'theta_rel_rad', 'y_l')


class OutputError(IOError):
    pass


def fmt(value):
    return format(float(value), '.17g')


@contextmanager
def atomic_write(path):
    """Open ``path`` for text writing; it only appears once fully written."""
    path = os.path.abspath(path)
    directory, name = os.path.split(path)
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix='.' + name,
                                   suffix='.tmp')
    except OSError as e:
        raise OutputError('cannot write %s (%s)' % (path, e))
    try:
        with open(fd, 'w', encoding='utf-8', newline='') as f:
            yield f
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except OSError as e:
        _discard(tmp)
        raise OutputError('cannot write %s (%s)' % (path, e))
    except BaseException:
        _discard(tmp)
        raise
    logger.info('Wrote %s', path)


def _discard(tmp):
    try:
        os.unlink(tmp)
    except OSError:
        pass


def _writer(f):
    return csv.writer(f, lineterminator='\n')


def links_path_for(path):
    root, ext = os.path.splitext(path)
    return root + '_links' + (ext or '.csv')


def write_trajectory(log, path, links_path=None):
    """Satellite rows to ``path`` and link rows to the companion file."""
    with atomic_write(path) as f:
        writer = _writer(f)
        writer.writerow(TRAJECTORY_HEADER)
        for k, t in enumerate(log.t):
            for i in range(log.n_sats):
                writer.writerow(
                    [fmt(t), i + 1] + [fmt(getattr(log, name)[k, i]) for name in
                                       ('r', 'v', 'omega', 'theta', 'tau_r',
                                        'tau_theta', 'u')])
    links_path = links_path or links_path_for(path)
    with atomic_write(links_path) as f:
        writer = _writer(f)
        writer.writerow(LINK_HEADER)
        for k, t in enumerate(log.t):
            for l in range(log.n_links):
                writer.writerow([fmt(t), l + 1, fmt(log.theta_rel[k, l]),
                                 fmt(log.y[k, l])])
    return path, links_path


def _float_list(values):
    return [float(x) for x in values]


def report_document(report, certification=None):
    document = {
        't_acq_sols': report.t_acq_sols,
        't_acq_s': report.t_acq,
        'acquired': report.acquired,
        'max_abs_tau_r_N': report.max_abs_tau_r,
        'max_abs_tau_theta_N': report.max_abs_tau_theta,
        'final_spacing_err_deg': _float_list(report.final_spacing_err_deg),
        'final_omega_err_radps': _float_list(report.final_omega_err),
        'final_r_err_m': _float_list(report.final_r_err),
        'lyapunov_monotone': report.lyapunov_monotone,
        'saturation_events': report.saturation_events,
        'aborted': report.aborted,
        'abort_reason': report.abort_reason,
        'passivity_violations': report.violation_counts,
    }
    if certification is not None:
        document['passivity_violations'] = {
            kind: values['violations']
            for kind, values in certification['subsystems'].items()}
    return document


def _dump_json(document, path):
    with atomic_write(path) as f:
        json.dump(document, f, indent=2, sort_keys=True, allow_nan=False)
        f.write('\n')
    return path


def write_report(report, path, certification=None):
    return _dump_json(report_document(report, certification), path)


def certification_document(summaries, log, trajectory_path=None):
    """JSON-ready summary of a certification pass over ``log``."""
    subsystems = {kind: summary.as_dict() for kind, summary in summaries.items()}
    V = np.asarray(log.V)
    step = float(log.t[1] - log.t[0]) if len(log) > 1 else None
    document = {
        'subsystems': subsystems,
        'total_violations': sum(s['violations'] for s in subsystems.values()),
        'log_interval_s': step,
        'samples': len(log),
        'tolerance_model': 'safety * C * dt**2 + 64 * eps * ((max|S| + '
                           'max|sensitivity|) / dt + max|supply|), '
                           'C = max|S\'\'\'| / 6',
        'lyapunov': {
            'V_initial': float(V[0]) if V.size else None,
            'V_final': float(V[-1]) if V.size else None,
            'max_V_dot': float(np.max(log.V_dot)) if V.size else None,
        },
        'trajectory': trajectory_path,
    }
    for values in subsystems.values():
        for key, value in values.items():
            if isinstance(value, float) and not math.isfinite(value):
                values[key] = None
    return document


def write_certification(document, path):
    return _dump_json(document, path)


def write_plot_data(log, path, stride=10):
    """Every ``stride``-th logged row in wide format, for plotting."""
    header = ['t_s', 'kc', 'V']
    for name in ('r_m', 'v_mps', 'omega_radps', 'theta_deg', 'tau_r_N',
                 'tau_theta_N'):
        header += ['%s_%d' % (name, i + 1) for i in range(log.n_sats)]
    header += ['spacing_deg_%d' % (l + 1) for l in range(log.n_links)]
    with atomic_write(path) as f:
        writer = _writer(f)
        writer.writerow(header)
        for k in range(0, len(log), stride):
            row = [log.t[k], log.kc[k], log.V[k]]
            row += list(log.r[k]) + list(log.v[k]) + list(log.omega[k])
            row += list(np.degrees(wrap_angle(log.theta[k])))
            row += list(log.tau_r[k]) + list(log.tau_theta[k])
            row += list(np.degrees(log.theta_rel[k]))
            writer.writerow([fmt(x) for x in row])
    return path
