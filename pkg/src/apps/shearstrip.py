#!/usr/bin/env python

import sys
import logging
from optparse import OptionParser

from pyrocko import util

import shearstrip

logger = logging.getLogger('shearstrip.main')


def d2u(d):
    if isinstance(d, dict):
        return dict((k.replace('-', '_'), v) for (k, v) in d.items())
    else:
        return d.replace('-', '_')


subcommand_descriptions = {
    'init': 'print a default configuration',
    'oscillator': 'check the harmonic oscillator levels',
    'hardy': 'scan the Hardy constant over the strip length',
    'mu-curve': 'compute the lowest eigenvalue curve of the self-similar '
                'operators',
    'evolve': 'integrate the heat equation and fit decay exponents',
    'full-report': 'evaluate all claims',
    'version': 'print version number of shearstrip and its main '
               'dependencies',
}

subcommand_usages = {
    'init': 'init [options]',
    'oscillator': 'oscillator [options]',
    'hardy': 'hardy [options]',
    'mu-curve': 'mu-curve [options]',
    'evolve': 'evolve [options]',
    'full-report': 'full-report [options]',
    'version': 'version',
}

subcommands = subcommand_descriptions.keys()

program_name = 'shearstrip'

usage_tdata = d2u(subcommand_descriptions)
usage_tdata['program_name'] = program_name
usage_tdata['version_number'] = shearstrip.__version__


usage = '''%(program_name)s <subcommand> [options] [--] <arguments> ...

Spectral and time-domain checks of heat decay in sheared strips.

This is shearstrip version %(version_number)s.

Subcommands:

    init            %(init)s
    oscillator      %(oscillator)s
    hardy           %(hardy)s
    mu-curve        %(mu_curve)s
    evolve          %(evolve)s
    full-report     %(full_report)s
    version         %(version)s

To get further help and a list of available options for any subcommand run:

    %(program_name)s <subcommand> --help

''' % usage_tdata


def main(args=None):
    if args is None:
        args = sys.argv[1:]

    args = list(args)
    if len(args) < 1:
        sys.exit('Usage: %s' % usage)

    command = args.pop(0)

    if command in subcommands:
        globals()['command_' + d2u(command)](args)

    elif command in ('--help', '-h', 'help'):
        if command == 'help' and args:
            acommand = args[0]
            if acommand in subcommands:
                globals()['command_' + d2u(acommand)](['--help'])

        sys.exit('Usage: %s' % usage)

    else:
        die('no such subcommand: %s' % command)


def add_common_options(parser):
    parser.add_option(
        '--loglevel',
        action='store',
        dest='loglevel',
        type='choice',
        choices=('critical', 'error', 'warning', 'info', 'debug'),
        default='info',
        help='set logger level to '
             '"critical", "error", "warning", "info", or "debug". '
             'Default is "%default".')


def add_run_options(parser):
    parser.add_option(
        '--config', dest='config_path', metavar='PATH',
        help='read run configuration from PATH')
    parser.add_option(
        '--out', dest='out_path', metavar='DIR',
        help='write CSV files and report into existing directory DIR')
    parser.add_option(
        '--seed', dest='seed', type=int,
        help='seed of the eigensolver start vectors')
    parser.add_option(
        '--nparallel', dest='nparallel', type=int,
        help='number of worker processes for independent solves')


def process_common_options(command, parser, options):
    util.setup_logging(program_name, options.loglevel)


def cl_parse(command, args, setup=None, details=None):
    usage = subcommand_usages[command]
    descr = subcommand_descriptions[command]

    if isinstance(usage, str):
        usage = [usage]

    susage = '%s %s' % (program_name, usage[0])
    for s in usage[1:]:
        susage += '\n%s%s %s' % (' '*7, program_name, s)

    description = descr[0].upper() + descr[1:] + '.'

    if details:
        description = description + '\n\n%s' % details

    parser = OptionParser(usage=susage, description=description)

    if setup:
        setup(parser)

    add_common_options(parser)
    (options, args) = parser.parse_args(args)
    process_common_options(command, parser, options)
    return parser, options, args


def die(message, err=''):
    if err:
        sys.exit('%s failed: %s \n %s' % (program_name, message, err))
    else:
        sys.exit('%s failed: %s' % (program_name, message))


def help_and_die(parser, message):
    parser.print_help(sys.stderr)
    sys.stderr.write('\n')
    die(message)


def get_config(options, experiment):
    if options.config_path:
        config = shearstrip.read_config(options.config_path)
    else:
        config = shearstrip.default_config()

    config.experiment = experiment
    if options.out_path is not None:
        config.out_path = options.out_path
        config.path_prefix = None
        config.set_basepath('.')

    if options.seed is not None:
        config.seed = options.seed

    if options.nparallel is not None:
        config.nparallel = options.nparallel

    config.check()
    return config


def run_experiment(command, experiment, args):
    parser, options, args = cl_parse(command, args, add_run_options)
    if args:
        help_and_die(parser, 'unexpected arguments: %s' % ' '.join(args))

    try:
        config = get_config(options, experiment)
        report = shearstrip.run(config)

    except shearstrip.ShearStripError as e:
        die(str(e))

    print(report.summary(), end='')
    if not report.all_passed:
        sys.exit(1)


def command_oscillator(args):
    run_experiment('oscillator', 'oscillator', args)


def command_hardy(args):
    run_experiment('hardy', 'hardy', args)


def command_mu_curve(args):
    run_experiment('mu-curve', 'mu_curve', args)


def command_evolve(args):
    run_experiment('evolve', 'evolve', args)


def command_full_report(args):
    run_experiment('full-report', 'full_report', args)


def command_init(args):
    parser, options, args = cl_parse('init', args)
    if args:
        help_and_die(parser, 'unexpected arguments: %s' % ' '.join(args))

    print(shearstrip.dump_config(shearstrip.default_config()), end='')


def command_version(args):
    def setup(parser):
        parser.add_option(
            '--short', dest='short', action='store_true',
            help='only print shearstrip\'s version number')

    parser, options, args = cl_parse('version', args, setup)

    if options.short:
        print(shearstrip.__version__)
        return

    vi = shearstrip.version_info()
    print('shearstrip: %s' % vi.shearstrip_version)
    for name, version in sorted(vi.dependencies.items()):
        print('%s: %s' % (name, version))


if __name__ == '__main__':
    main()
