#!/usr/bin/env python3

from functools import wraps
from pathlib import Path
from time import perf_counter
from ReproDP.errors import ConfigError

def validate_file_presence(func):
    '''Determine if a file is found on the local filesystem.
    '''

    @wraps(func)
    def wrapper(fname,*args,**kwargs):

        p = Path(fname)
        if p.exists() and p.is_file():
            return func(fname,*args,**kwargs)
        else:
            raise ConfigError(
                f'File not found: {fname}'
            )

    return wrapper

def timed(func):
    '''Return `(result, runtime_ms)` instead of the bare result.
    '''

    @wraps(func)
    def wrapper(*args,**kwargs):

        start = perf_counter()
        result = func(*args,**kwargs)
        return result, int(round((perf_counter() - start) * 1000))

    return wrapper
