#!/usr/bin/env python3
'''Command line: `repro-dp ci|pvalue|grid|replicate --config <file>`.

Exit codes: 0 success, 2 configuration or argument errors, 3 numeric
failures, 4 when more than 1% of replicates fail.
'''

import argparse
import logging
import os
import sys
from ReproDP import arguments
from ReproDP.color import ColorProfiles
from ReproDP.errors import (ReproError, ConfigError, InvalidArgumentError,
        InfeasibleBandError, ReproNumericError, UnboundedGridError)
from ReproDP.logo import logo
from ReproDP.output import emit_csv, get_output_table
from ReproDP.reprodp import cmd_ci, cmd_pvalue, cmd_grid, cmd_replicate
from ReproDP.sql import create_db
from ReproDP.validators import load_config

logger = logging.getLogger(__name__)

LOG_ENV = 'REPRO_DP_LOG'
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

EXIT_CODES = {
    ConfigError: 2,
    InvalidArgumentError: 2,
    InfeasibleBandError: 2,
    ReproNumericError: 3,
    UnboundedGridError: 3,
    ReproError: 3,
}

def exit_code_for(error):

    for cls in type(error).__mro__:
        if cls in EXIT_CODES: return EXIT_CODES[cls]
    return 1

def configure_logging(environ=None):
    '''Root handler on stderr at the level named by REPRO_DP_LOG.
    '''

    name = (environ if environ is not None else os.environ) \
        .get(LOG_ENV, 'WARNING').upper()
    level = logging.getLevelName(name)

    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
            format=LOG_FORMAT, stream=sys.stderr, force=True)

    if not isinstance(level, int):
        logger.warning('unknown %s level %r, using WARNING', LOG_ENV, name)

# =============
# BUILD THE CLI
# =============

def build_parser():

    main_parser = argparse.ArgumentParser('repro-dp',
        description='Simulation-based inference on differentially private '
        'releases with a fixed bank of seeds.')
    main_parser.set_defaults(cmd=None)

    subparsers = main_parser.add_subparsers(help='sub-command help',
        metavar='')

    commands = (
        ('ci', 'Confidence intervals for the reported coordinates'),
        ('pvalue', 'p-value of a null region'),
        ('grid', 'Accepted cells of a confidence grid'),
        ('replicate', 'Monte Carlo coverage, width and type I studies'),
    )

    for name, help in commands:

        parser = subparsers.add_parser(name, help=help)
        parser.set_defaults(cmd=name)

        general_group = parser.add_argument_group(
            'General Configuration Parameters'
        )
        arguments.config.add(general_group)
        arguments.seed.add(general_group)
        arguments.jobs.add(general_group)

        output_group = parser.add_argument_group(
            'Output Parameters'
        )
        arguments.out.add(output_group)
        arguments.color_profile.add(output_group)

        if name == 'replicate':
            arguments.database_output_file.add(output_group)

    return main_parser

COMMANDS = {
    'ci': cmd_ci,
    'pvalue': cmd_pvalue,
    'grid': cmd_grid,
}

def run(args):

    config = load_config(args.config).with_overrides(args.seed, args.out)
    if args.jobs < 1:
        raise ConfigError(f'--jobs must be positive, got {args.jobs}')

    if args.cmd == 'replicate':

        print(logo+'\n', file=sys.stderr)
        db_session = None
        if args.database_output_file:
            print(f'- Storing replicates in {args.database_output_file}',
                    file=sys.stderr)
            db_session = create_db(args.database_output_file)

        try:
            header, rows, status = cmd_replicate(config, args.jobs, db_session)
        finally:
            if db_session is not None: db_session.close()

        table_rows = [r for r in rows if r[0] == 'summary']

    else:

        header, rows, status = COMMANDS[args.cmd](config, args.jobs)
        table_rows = rows

    emit_csv(header, rows, config.output)

    if config.output:
        print(f'- Writing csv output to {config.output}', file=sys.stderr)
        print(get_output_table(header, table_rows,
            ColorProfiles[args.color_profile]))

    return status

def main(argv=None):

    main_parser = build_parser()
    args = main_parser.parse_args(argv)

    if not args.cmd:
        main_parser.print_help()
        return 2

    configure_logging()

    try:
        return run(args)
    except ReproError as e:
        print(f'- {e.kind}: {e}', file=sys.stderr)
        return exit_code_for(e)
