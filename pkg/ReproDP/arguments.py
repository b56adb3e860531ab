#!/usr/bin/env python3

from ReproDP.color import ColorProfiles

class Argument:
    '''Basic object that will be used to add arguments
    to argparse objects automagically.
    '''

    def __init__(self, *args, **kwargs):

        self.args = args
        self.kwargs = kwargs

    def add(self, target):
        '''Add the argument to the target argparse object.
        '''

        target.add_argument(*self.args, **self.kwargs)

config = Argument('--config','-c',
    required=True,
    help='''JSON experiment configuration. See configs/ for
    the shipped studies.
    ''')

jobs = Argument('--jobs','-j',
    type=int,
    default=1,
    help='''Number of worker processes used for replicates.
    Results do not depend on this value. Default: %(default)s
    ''')

seed = Argument('--seed','-s',
    type=int,
    default=None,
    help='''Master seed, overriding "master_seed" in the
    configuration.
    ''')

out = Argument('--out','-o',
    default=None,
    help='''CSV output file, overriding "output" in the
    configuration. CSV goes to stdout when neither is set.
    ''')

database_output_file = Argument('--database-output-file','-dof',
    default=None,
    help='''SQLite file receiving every replicate row. Re-running
    with the same file and configuration skips finished replicates.
    ''')

color_profile = Argument('--color-profile','-cp',
    default='default',
    choices=list(ColorProfiles.keys()),
    help='''Color profile of the summary table printed when CSV
    goes to a file. Set to "disable" to remove color altogether.
    Default: %(default)s
    ''')
