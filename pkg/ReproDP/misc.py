#!/usr/bin/env python3

import hashlib
import json
import math

def replicate_seed(master_seed, index):
    '''Master seed of replicate `index`: master_seed XOR index.
    '''

    return int(master_seed) ^ int(index)

def format_value(value, digits=10):
    '''Render a number for CSV output. Infinite values are written as
    `inf`/`-inf` and missing values as an empty string.
    '''

    if value is None: return ''
    if isinstance(value, bool): return str(value).lower()
    if isinstance(value, int): return str(value)

    value = float(value)
    if math.isnan(value): return 'nan'
    if math.isinf(value): return 'inf' if value > 0 else '-inf'

    return f'{value:.{digits}g}'

def config_digest(config):
    '''Stable digest of a configuration mapping, used to recognize
    replicate rows produced by the same study.
    '''

    canonical = json.dumps(config, sort_keys=True, separators=(',',':'))
    return hashlib.sha256(canonical.encode('utf8')).hexdigest()
