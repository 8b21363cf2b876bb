""":mod:`areosync.cli` --- Command-line entry point

Subcommands::

    areosync run --config scenario.json [--out-dir DIR] [--no-moons]
                 [--seed N] [--dt S] [--horizon-sols X]
    areosync certify --config scenario.json [--horizon-sols X] [--with-moons]
    areosync equilibrium --config scenario.json
    areosync dump-topology --n N

Exit codes: 0 success, 1 invalid configuration or arguments, 2 aborted run
or unwritable output, 3 passivity certification found violations.

"""
import argparse
import csv
import logging
import math
import os
import sys

from . import metadata
from .analysis import certify_passivity, compute_equilibrium
from .config import (ConfigError, from_document, load_config, override,
                     serialize_config)
from .dynamics import SOL
from .engine import certification_scenario, run
from .network import TopologyError, build_path_incidence
from .output import (OutputError, certification_document, write_certification,
                     write_plot_data, write_report, write_trajectory)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ABORTED = 2
EXIT_THRESHOLD = 3

OUT_DIR_ENV = 'AREOSYNC_OUT_DIR'
DEFAULT_OUT_DIR = 'areosync-out'


def build_parser():
    parser = argparse.ArgumentParser(prog=metadata.title,
                                     description=metadata.description)
    parser.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='logging verbosity on stderr (default: WARNING)')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    run_cmd = commands.add_parser('run', help='simulate a scenario')
    run_cmd.add_argument('--config', required=True, help='scenario JSON file')
    run_cmd.add_argument('--out-dir', help='directory for the artifacts')
    run_cmd.add_argument('--no-moons', action='store_true',
                         help='leave out the moon perturbations')
    run_cmd.add_argument('--seed', type=int, help='initial condition seed')
    run_cmd.add_argument('--dt', type=float, help='integration step, s')
    run_cmd.add_argument('--horizon-sols', type=float,
                         help='simulated time, Sols')

    certify_cmd = commands.add_parser(
        'certify', help='check the passivity inequalities on a short run')
    certify_cmd.add_argument('--config', required=True)
    certify_cmd.add_argument('--out-dir')
    certify_cmd.add_argument('--seed', type=int)
    certify_cmd.add_argument('--dt', type=float)
    certify_cmd.add_argument('--horizon-sols', type=float, default=1.0,
                             help='certified span, Sols (default: 1)')
    certify_cmd.add_argument('--with-moons', action='store_true',
                             help='certify the perturbed model instead of the '
                                  'nominal one')

    eq_cmd = commands.add_parser('equilibrium',
                                 help='print the constellation equilibrium')
    eq_cmd.add_argument('--config', required=True)

    topo_cmd = commands.add_parser('dump-topology',
                                   help='print the incidence matrix as CSV')
    topo_cmd.add_argument('--n', type=int, required=True,
                          help='number of satellites')
    return parser


def load_scenario(args, horizon_override=True):
    """Scenario from ``--config`` with command-line overrides applied."""
    try:
        with open(args.config, encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError([('--config', 'cannot read %s (%s)'
                            % (args.config, e))])
    scenario, output = load_config(text)
    overrides = []
    if getattr(args, 'no_moons', False):
        overrides.append(('moons_enabled', False))
    if getattr(args, 'seed', None) is not None:
        overrides.append(('seed', args.seed))
    if getattr(args, 'dt', None) is not None:
        overrides.append(('dt_s', args.dt))
    if horizon_override and getattr(args, 'horizon_sols', None) is not None:
        overrides.append(('horizon_sols', args.horizon_sols))
    if overrides:
        document = serialize_config(scenario, output)
        for key, value in overrides:
            document = override(document, key, value)
        scenario, output = from_document(document)
    return scenario, output


def out_dir(args, output):
    return (getattr(args, 'out_dir', None) or output.out_dir
            or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def cmd_run(args):
    scenario, output = load_scenario(args)
    log, report = run(scenario)
    directory = out_dir(args, output)
    write_trajectory(log, os.path.join(directory, output.trajectory_csv),
                     os.path.join(directory, output.links_csv))
    write_plot_data(log, os.path.join(directory, output.plot_csv),
                    output.plot_stride)
    write_report(report, os.path.join(directory, output.report_json))
    if report.aborted:
        print('run aborted: %s' % report.abort_reason, file=sys.stderr)
        return EXIT_ABORTED
    if report.acquired:
        print('acquired in %.2f Sols' % report.t_acq_sols)
    else:
        print('not acquired')
    print('max |tau_r| = %.6g N, max |tau_theta| = %.6g N, '
          '%d saturation events' % (report.max_abs_tau_r,
                                    report.max_abs_tau_theta,
                                    report.saturation_events))
    return EXIT_OK


def cmd_certify(args):
    scenario, output = load_scenario(args, horizon_override=False)
    try:
        scenario = certification_scenario(scenario, args.horizon_sols * SOL,
                                          args.with_moons)
    except ValueError as e:
        raise ConfigError([('--horizon-sols', str(e))])
    if scenario.n_steps < 2:
        raise ConfigError([('--horizon-sols',
                            'certification needs at least 3 logged samples, '
                            'got %d' % (scenario.n_steps + 1))])
    log, report = run(scenario)
    directory = out_dir(args, output)
    trajectory_path = os.path.join(directory, output.trajectory_csv)
    write_trajectory(log, trajectory_path,
                     os.path.join(directory, output.links_csv))
    if report.aborted:
        write_report(report, os.path.join(directory, output.report_json))
        print('run aborted: %s' % report.abort_reason, file=sys.stderr)
        return EXIT_ABORTED

    system_eq = compute_equilibrium(scenario.desired,
                                    build_path_incidence(scenario.n_sats),
                                    scenario.link_output)
    _, summaries = certify_passivity(log, system_eq, scenario.gains,
                                     scenario.link_output,
                                     build_path_incidence(scenario.n_sats))
    report.violation_counts = {kind: summary.violations
                               for kind, summary in summaries.items()}
    document = certification_document(summaries, log, trajectory_path)
    write_certification(document,
                        os.path.join(directory, output.certification_json))
    write_report(report, os.path.join(directory, output.report_json), document)
    for kind, values in sorted(document['subsystems'].items()):
        print('%s: %d violations in %d checks' % (kind, values['violations'],
                                                  values['checked']))
    if document['total_violations']:
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_equilibrium(args):
    scenario, _ = load_scenario(args)
    topo = build_path_incidence(scenario.n_sats)
    eq = compute_equilibrium(scenario.desired, topo, scenario.link_output)
    print('r_d=%.1f km' % (eq.r_bar / 1e3))
    print('v_d=%g m/s' % eq.v_bar)
    print('omega_d=%.8g rad/s' % eq.omega_bar)
    print('spacing=%.10g deg' % math.degrees(eq.theta_rel_bar[0]))
    print('theta_rel_bar=%s rad' % ', '.join('%.17g' % x
                                             for x in eq.theta_rel_bar))
    return EXIT_OK


def cmd_dump_topology(args):
    topo = build_path_incidence(args.n)
    writer = csv.writer(sys.stdout, lineterminator='\n')
    writer.writerow(['sat_id'] + ['link_%d' % (l + 1)
                                  for l in range(topo.n_links)])
    for i, row in enumerate(topo.incidence):
        writer.writerow([i + 1] + [int(x) for x in row])
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'certify': cmd_certify,
    'equilibrium': cmd_equilibrium,
    'dump-topology': cmd_dump_topology,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_INVALID
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format='%(asctime)s [%(name)s] %(levelname)s: '
                               '%(message)s')
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, TopologyError) as e:
        print(str(e), file=sys.stderr)
        return EXIT_INVALID
    except OutputError as e:
        logger.error('%s', e)
        return EXIT_ABORTED


if __name__ == '__main__':
    sys.exit(main())
