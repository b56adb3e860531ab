#!/usr/bin/env python3
'''Experiment configuration: JSON files checked key by key.
'''

import json
import logging
from dataclasses import dataclass, field, replace
from inspect import signature
from numbers import Integral, Real
from ReproDP.decorators import validate_file_presence
from ReproDP.errors import ConfigError, InvalidArgumentError
from ReproDP.inference import OptimizerSpec, DEFAULT_TOL, DEFAULT_RESOLUTION
from ReproDP.models import MODELS, build_model
from ReproDP.output import model_label

logger = logging.getLogger(__name__)

REPRO = 'repro'
BOOTSTRAP_PERCENTILE = 'bootstrap_percentile'
BOOTSTRAP_T = 'bootstrap_t'
INVERSION = 'inversion'
METHODS = (REPRO, BOOTSTRAP_PERCENTILE, BOOTSTRAP_T, INVERSION)

STATISTICS = ('default', 'mahalanobis', 'halfspace', 'simplicial',
        'spatial', 'scalar', 'pivot')

KNOWN_KEYS = ('model', 'method', 'statistic', 'alpha', 'R', 'B',
        'replicates', 'master_seed', 'true_theta', 's_obs', 'coords', 'null',
        'significance', 'output', 'tol', 'resolution', 'optimizer', 'sweep',
        'record_runtime')

OPTIMIZER_KEYS = ('n_starts', 'max_evals', 'method', 'paranoid', 'seed')

# ==========
# VALIDATORS
# ==========

def validate_probability(name, value):

    if isinstance(value, bool) or not isinstance(value, Real) or \
            not 0 < value < 1:
        raise ConfigError(f'{name} must be a number in (0, 1), got {value!r}')
    return float(value)

def validate_int(name, value, minimum):

    if isinstance(value, bool) or not isinstance(value, Integral) or \
            value < minimum:
        raise ConfigError(f'{name} must be an integer >= {minimum}, got {value!r}')
    return int(value)

def validate_positive(name, value):

    if isinstance(value, bool) or not isinstance(value, Real) or \
            not value > 0:
        raise ConfigError(f'{name} must be a positive number, got {value!r}')
    return float(value)

def validate_numbers(name, value, length=None):

    if not isinstance(value, list) or not all(
            isinstance(v, Real) and not isinstance(v, bool) for v in value):
        raise ConfigError(f'{name} must be a list of numbers, got {value!r}')
    if length is not None and len(value) != length:
        raise ConfigError(f'{name} needs {length} values, got {len(value)}')
    return [float(v) for v in value]

def validate_choice(name, value, choices):

    if value not in choices:
        raise ConfigError(
            f'{name} must be one of {", ".join(choices)}, got {value!r}')
    return value

def validate_mapping(name, value, keys=None):

    if not isinstance(value, dict):
        raise ConfigError(f'{name} must be an object, got {value!r}')
    if keys is not None:
        unknown = sorted(set(value) - set(keys))
        if unknown:
            raise ConfigError(f'unknown {name} keys: {", ".join(unknown)}')
    return value

# ======
# CONFIG
# ======

@dataclass(frozen=True)
class ExperimentConfig:
    '''Validated experiment. `raw` keeps the decoded JSON, which is what
    worker processes receive and what the replicate store digests.
    '''

    model: str
    model_params: dict
    method: str = REPRO
    statistic: str = 'default'
    alpha: float = 0.05
    R: int = 200
    B: int = 200
    replicates: int = 100
    master_seed: int = 0
    true_theta: list = None
    s_obs: list = None
    coords: list = None
    null: dict = None
    significance: float = None
    output: str = None
    tol: float = DEFAULT_TOL
    resolution: int = DEFAULT_RESOLUTION
    optimizer: dict = field(default_factory=dict)
    sweep: dict = None
    record_runtime: bool = True
    raw: dict = field(default_factory=dict, compare=False)

    def build_model(self, **overrides):
        '''Instantiate the model, with `overrides` on top of the
        configured parameters.
        '''

        try:
            return build_model(self.model, {**self.model_params, **overrides})
        except InvalidArgumentError as e:
            raise ConfigError(str(e))

    def optimizer_spec(self):

        opt = self.optimizer
        spec = OptimizerSpec(**{k: opt[k] for k in
            ('n_starts', 'max_evals', 'method', 'seed') if k in opt})
        return OptimizerSpec.paranoid(spec) if opt.get('paranoid') else spec

    def statistic_for(self, model):

        try:
            return model.statistic(self.statistic)
        except InvalidArgumentError as e:
            raise ConfigError(str(e))

    def sweep_variants(self):
        '''`(label, config)` per sweep value. The swept name is a model
        parameter, `R`, or a coordinate of true_theta. Without a sweep,
        the single pair is `(model name, self)`.
        '''

        if self.sweep is None:
            return [(self.model, self)]

        param = self.sweep['param']
        names = self.build_model().param_box.names
        variants = []

        for value in self.sweep['values']:

            raw = {k: v for k, v in self.raw.items() if k != 'sweep'}
            raw['model'] = {**raw['model'],
                'params': {**raw['model'].get('params', {})}}

            if param == 'R':
                raw['R'] = value
            elif param in names and self.true_theta is not None:
                theta = list(self.true_theta)
                theta[names.index(param)] = value
                raw['true_theta'] = theta
            else:
                raw['model']['params'][param] = value

            variants.append((model_label(self.model, param, value),
                parse_config(raw)))

        return variants

    def with_overrides(self, seed=None, out=None):

        changes = {}
        if seed is not None:
            changes['master_seed'] = validate_int('--seed', seed, 0)
        if out is not None:
            changes['output'] = out
        if not changes:
            return self

        raw = dict(self.raw)
        raw.update({k: v for k, v in changes.items() if k == 'master_seed'})
        return replace(self, raw=raw, **changes)

def parse_config(raw):
    '''Validate a decoded JSON mapping and return an ExperimentConfig.
    '''

    validate_mapping('config', raw, KNOWN_KEYS)
    if 'model' not in raw:
        raise ConfigError('config needs a "model" entry')

    model = validate_mapping('model', raw['model'], ('name', 'params'))
    name = validate_choice('model.name', model.get('name'), tuple(MODELS))
    params = validate_mapping('model.params', model.get('params', {}))

    kwargs = {'model': name, 'model_params': dict(params), 'raw': raw}

    if 'method' in raw:
        kwargs['method'] = validate_choice('method', raw['method'], METHODS)
    if 'statistic' in raw:
        kwargs['statistic'] = validate_choice('statistic', raw['statistic'],
                STATISTICS)
    if 'alpha' in raw:
        kwargs['alpha'] = validate_probability('alpha', raw['alpha'])
    if 'significance' in raw:
        kwargs['significance'] = validate_probability('significance',
                raw['significance'])
    for key, minimum in (('R', 1), ('B', 2), ('replicates', 1),
            ('master_seed', 0), ('resolution', 1)):
        if key in raw:
            kwargs[key] = validate_int(key, raw[key], minimum)
    if 'tol' in raw:
        kwargs['tol'] = validate_positive('tol', raw['tol'])
    for key in ('true_theta', 's_obs'):
        if key in raw:
            kwargs[key] = validate_numbers(key, raw[key])
    if 'coords' in raw:
        if not isinstance(raw['coords'], list) or \
                not all(isinstance(c, str) for c in raw['coords']):
            raise ConfigError(f'coords must be a list of names, got {raw["coords"]!r}')
        kwargs['coords'] = list(raw['coords'])
    if 'null' in raw:
        null = validate_mapping('null', raw['null'], ('fix',))
        fix = validate_mapping('null.fix', null.get('fix', {}))
        validate_numbers('null.fix values', list(fix.values()))
        kwargs['null'] = {'fix': dict(fix)}
    if 'output' in raw:
        if not isinstance(raw['output'], str):
            raise ConfigError(f'output must be a path, got {raw["output"]!r}')
        kwargs['output'] = raw['output']
    if 'optimizer' in raw:
        opt = validate_mapping('optimizer', raw['optimizer'], OPTIMIZER_KEYS)
        for key in ('n_starts', 'max_evals'):
            if key in opt: validate_int(f'optimizer.{key}', opt[key], 1)
        if 'seed' in opt: validate_int('optimizer.seed', opt['seed'], 0)
        kwargs['optimizer'] = dict(opt)
    if 'sweep' in raw:
        sweep = validate_mapping('sweep', raw['sweep'], ('param', 'values'))
        if not isinstance(sweep.get('param'), str) or \
                not isinstance(sweep.get('values'), list) or not sweep['values']:
            raise ConfigError('sweep needs a "param" name and a nonempty "values" list')
        kwargs['sweep'] = dict(sweep)
    if 'record_runtime' in raw:
        if not isinstance(raw['record_runtime'], bool):
            raise ConfigError('record_runtime must be true or false')
        kwargs['record_runtime'] = raw['record_runtime']

    config = ExperimentConfig(**kwargs)
    validate_compatibility(config)

    return config

def validate_compatibility(config):
    '''Checks that need the model: dimensions, coordinates and
    method support.
    '''

    model = config.build_model()
    box = model.param_box

    if config.true_theta is not None:
        validate_numbers('true_theta', config.true_theta, box.dim)
        if not box.contains(config.true_theta):
            raise ConfigError(f'true_theta {config.true_theta} lies outside the box')
    if config.s_obs is not None:
        validate_numbers('s_obs', config.s_obs, model.summary_dim)
    for name in config.coords or ():
        if name not in box.names:
            raise ConfigError(f'unknown coordinate {name!r}; expected one of {box.names}')
    if config.null is not None:
        for name in config.null['fix']:
            if name not in box.names:
                raise ConfigError(f'null fixes unknown coordinate {name!r}')

    if config.method == INVERSION and config.model != 'exponential':
        raise ConfigError('the inversion method is only available for the exponential model')
    if config.method in (BOOTSTRAP_PERCENTILE, BOOTSTRAP_T) and model.estimator is None:
        raise ConfigError(f'model {config.model} has no estimator for the bootstrap')
    if config.method != REPRO and config.null is not None:
        raise ConfigError('null hypotheses are tested with the repro method only')
    if config.sweep is not None:
        param = config.sweep['param']
        if param != 'R' and param not in box.names and \
                param not in signature(MODELS[config.model]).parameters:
            raise ConfigError(f'cannot sweep {param!r}: not R, a coordinate or a model parameter')

    config.statistic_for(model)
    try:
        config.optimizer_spec()
    except InvalidArgumentError as e:
        raise ConfigError(str(e))

@validate_file_presence
def load_config(fname):
    '''Read and validate a JSON configuration file.
    '''

    try:
        with open(fname) as infile:
            raw = json.load(infile)
    except json.JSONDecodeError as e:
        raise ConfigError(f'{fname} is not valid JSON: {e}')

    logger.debug('loaded config %s', fname)
    return parse_config(raw)
