#!/usr/bin/env python3

import csv
import os
import tempfile
from io import StringIO
from pathlib import Path
import sys
from tabulate import tabulate
from ReproDP.misc import format_value

# ===================
# CONSTANTS/FUNCTIONS
# ===================

CI_HEADER = ['model', 'method', 'alpha', 'R', 'coord', 'lower', 'upper',
        'width', 'empty', 'seed', 'runtime_ms']

PVALUE_HEADER = ['model', 'p', 'early_stopped', 'seed', 'runtime_ms']

REPLICATE_HEADER = ['replicate', 'seed', 'coord', 'metric', 'value', 'se',
        'status', 'runtime_ms']

AXES = 'xyz'

def axis_names(d):
    '''x, y, z for up to three coordinates, c0..c{d-1} beyond.
    '''

    return list(AXES[:d]) if d <= len(AXES) else [f'c{i}' for i in range(d)]

def grid_header(d):
    return [f'{a}_{end}' for a in axis_names(d) for end in ('lo', 'hi')]

def model_label(name, sweep_param=None, value=None):
    '''`poisson` or, inside a sweep, `poisson[c=4]`.
    '''

    if sweep_param is None: return name
    return f'{name}[{sweep_param}={format_value(value)}]'

# ====
# ROWS
# ====

def ci_row(label, method, ci, seed, runtime_ms):

    width = '' if ci.empty else format_value(ci.width)
    lower = '' if ci.empty else format_value(ci.lower)
    upper = '' if ci.empty else format_value(ci.upper)

    return [label, method, format_value(ci.alpha), str(ci.R), ci.coord,
            lower, upper, width, format_value(bool(ci.empty)), str(seed),
            str(runtime_ms)]

def pvalue_row(label, result, seed, runtime_ms):

    return [label, format_value(result.p), format_value(bool(result.early_stopped)),
            str(seed), str(runtime_ms)]

def grid_rows(grid):

    return [
        [format_value(float(v)) for pair in zip(lo, hi) for v in pair]
        for lo, hi in grid.cells
    ]

def replicate_row(replicate, seed, coord, metric, value, se=None,
        status='ok', runtime_ms=0):

    return [str(replicate), '' if seed is None else str(seed), coord, metric,
            format_value(value), format_value(se), status, str(runtime_ms)]

# ======
# OUTPUT
# ======

def get_output_csv(header, rows):
    '''Render rows as CSV text with a header line.
    '''

    outfile = StringIO()
    writer = csv.writer(outfile, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)

    return outfile.getvalue()

def write_atomic(path, text):
    '''Write through a temporary file in the target directory and rename
    it into place, so a failed run never leaves partial output.
    '''

    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent,
            prefix=f'.{path.name}.', suffix='.tmp')

    try:
        with os.fdopen(fd, 'w', newline='') as outfile:
            outfile.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp): os.remove(tmp)
        raise

def emit_csv(header, rows, out=None):
    '''CSV to `out` when given, to standard output otherwise.
    '''

    text = get_output_csv(header, rows)
    if out: write_atomic(out, text)
    else: sys.stdout.write(text)

def get_output_table(header, rows, color_profile=None):
    '''Return the rows formatted as a terminal table, alternating row
    styles when a color profile is given.
    '''

    if not rows:
        return '- No rows produced'

    out_rows = []
    for counter, row in enumerate(rows, start=1):

        if color_profile:
            row = [color_profile.mark(v) for v in row]

            # Color odd rows slightly darker
            if counter % 2: row = color_profile.style_odd(row)
            else: row = color_profile.style_even(row)

        out_rows.append(row)

    headers = list(header)
    if color_profile: headers = color_profile.style_header(headers)

    return tabulate(out_rows, headers=headers, disable_numparse=True)
