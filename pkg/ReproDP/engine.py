#!/usr/bin/env python3
'''Seed banks, generating equations and rank computation.

Every random quantity is drawn from a counter-based Philox stream keyed
by `(master_seed, purpose, index, slot)`. Seed `i` of a bank therefore
does not depend on how many seeds were requested, which makes banks
prefix-stable and lets replicates run in any order.
'''

import logging
from dataclasses import dataclass
import numpy as np
from ReproDP.errors import InvalidArgumentError, ReproNumericError

logger = logging.getLogger(__name__)

# =========
# CONSTANTS
# =========

BANK_STREAM = 0
OBSERVATION_STREAM = 1
BOOTSTRAP_STREAM = 2

DATA_SLOT = 0
DP_SLOT = 1

# Stand-in for infinite bounds when a finite search window is needed
DEFAULT_SEARCH_LIMIT = 1e3

def stream(master_seed, purpose, index, slot):
    '''Return the generator for one `(master_seed, purpose, index, slot)`
    counter.
    '''

    if int(master_seed) < 0:
        raise InvalidArgumentError(
            f'master seed must be nonnegative, got {master_seed}')

    key = np.random.SeedSequence(
        [int(master_seed), int(purpose), int(index), int(slot)])
    return np.random.Generator(np.random.Philox(key))

def _frozen(values, ndim=1):

    arr = np.array(values, dtype=float, ndmin=ndim)
    arr.setflags(write=False)
    return arr

# ============
# DOMAIN TYPES
# ============

@dataclass(frozen=True, eq=False)
class Seed:
    '''Model-specific randomness u = (data part, mechanism part).
    '''

    data_part: np.ndarray
    dp_part: np.ndarray

    def __post_init__(self):

        object.__setattr__(self, 'data_part', _frozen(self.data_part))
        object.__setattr__(self, 'dp_part', _frozen(self.dp_part))

        if not (np.all(np.isfinite(self.data_part)) and
                np.all(np.isfinite(self.dp_part))):
            raise InvalidArgumentError('seed values must be finite')

@dataclass(frozen=True, eq=False)
class SeedBank:
    '''R seeds stored row-wise: `data` is (R, data_dims) and `dp` is
    (R, dp_dims).
    '''

    data: np.ndarray
    dp: np.ndarray
    master_seed: int

    def __post_init__(self):

        object.__setattr__(self, 'data', _frozen(self.data, 2))
        object.__setattr__(self, 'dp', _frozen(self.dp, 2))

        if self.data.shape[0] != self.dp.shape[0]:
            raise InvalidArgumentError(
                'data and dp parts disagree on the number of seeds')

    @property
    def R(self):
        return self.data.shape[0]

    @property
    def seeds(self):
        return tuple(self[i] for i in range(self.R))

    def __len__(self):
        return self.R

    def __getitem__(self, index):

        if isinstance(index, slice):
            return SeedBank(self.data[index], self.dp[index],
                    self.master_seed)

        return Seed(self.data[index], self.dp[index])

@dataclass(frozen=True, eq=False)
class Summary:
    '''A privatized release s in R^d.
    '''

    values: np.ndarray

    def __post_init__(self):

        object.__setattr__(self, 'values', _frozen(self.values))
        if not np.all(np.isfinite(self.values)):
            raise ReproNumericError('summary has non-finite entries')

    @property
    def dim(self):
        return self.values.shape[0]

def as_summary(value):

    if isinstance(value, Summary): return value
    return Summary(value)

@dataclass(frozen=True, eq=False)
class ParamBox:
    '''Rectangular parameter space with optional interest coordinate.

    `search_lower`/`search_upper` give the finite window used to place
    optimizer starts when a true bound is infinite. Coordinates flagged
    in `integer` only take integral values and are enumerated rather
    than optimized.
    '''

    lower: np.ndarray
    upper: np.ndarray
    names: tuple
    interest_index: int = None
    integer: tuple = None
    search_lower: np.ndarray = None
    search_upper: np.ndarray = None

    def __post_init__(self):

        lower, upper = _frozen(self.lower), _frozen(self.upper)
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'names', tuple(self.names))

        d = lower.shape[0]
        if upper.shape[0] != d or len(self.names) != d:
            raise InvalidArgumentError('box bounds and names disagree in length')
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise InvalidArgumentError('box bounds must not be nan')
        if np.any(lower > upper):
            raise InvalidArgumentError(
                f'box lower bound exceeds upper bound: {lower} > {upper}')
        if self.interest_index is not None and \
                not 0 <= self.interest_index < d:
            raise InvalidArgumentError(
                f'interest index {self.interest_index} outside dimension {d}')

        integer = tuple(bool(v) for v in (self.integer or (False,)*d))
        if len(integer) != d:
            raise InvalidArgumentError('integer flags disagree in length')
        object.__setattr__(self, 'integer', integer)

        # Finite search window, always inside the true bounds
        slo = np.where(np.isfinite(lower), lower, -DEFAULT_SEARCH_LIMIT) \
            if self.search_lower is None else np.array(self.search_lower, float)
        shi = np.where(np.isfinite(upper), upper, DEFAULT_SEARCH_LIMIT) \
            if self.search_upper is None else np.array(self.search_upper, float)
        slo = np.clip(slo, lower, upper)
        shi = np.clip(shi, lower, upper)
        shi = np.maximum(shi, slo)
        object.__setattr__(self, 'search_lower', _frozen(slo))
        object.__setattr__(self, 'search_upper', _frozen(shi))

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def integer_mask(self):
        return np.array(self.integer, dtype=bool)

    def index_of(self, name):

        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidArgumentError(
                f'unknown parameter {name!r}; expected one of {self.names}')

    def contains(self, theta, atol=1e-12):

        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,) or not np.all(np.isfinite(theta)):
            return False
        if np.any(theta < self.lower - atol) or np.any(theta > self.upper + atol):
            return False

        mask = self.integer_mask
        return bool(np.all(theta[mask] == np.round(theta[mask])))

    def project(self, theta):
        '''Clip onto the box and round integer coordinates.
        '''

        theta = np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)
        mask = self.integer_mask
        theta[mask] = np.clip(np.round(theta[mask]),
                np.ceil(self.lower[mask]), np.floor(self.upper[mask]))
        return theta

    def _replace(self, lower, upper, search_lower=None, search_upper=None):

        return ParamBox(lower, upper, self.names, self.interest_index,
                self.integer, search_lower, search_upper)

    def restrict(self, index, lo, hi):
        '''Copy of the box with coordinate `index` limited to [lo, hi].
        '''

        lower, upper = self.lower.copy(), self.upper.copy()
        slo, shi = self.search_lower.copy(), self.search_upper.copy()
        lower[index], upper[index] = lo, hi
        slo[index], shi[index] = lo, hi

        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise InvalidArgumentError('restricted segments must be finite')

        return self._replace(lower, upper, slo, shi)

    def fix(self, values):
        '''Copy of the box with the named coordinates pinned.
        '''

        box = self
        for name, value in values.items():
            i = self.index_of(name)
            if not self.lower[i] <= value <= self.upper[i]:
                raise InvalidArgumentError(
                    f'{name}={value} lies outside [{self.lower[i]}, {self.upper[i]}]')
            box = box.restrict(i, float(value), float(value))

        return box

    def cell(self, lower, upper):
        '''Sub-box with the given finite bounds on every coordinate.
        '''

        return self._replace(lower, upper, lower, upper)

    def point(self, theta):

        theta = np.asarray(theta, dtype=float)
        return self._replace(theta, theta, theta, theta)

@dataclass(frozen=True, eq=False)
class RankResult:
    '''Ranks of the observed statistic among the repro statistics at one θ.
    `count_geq` mirrors `count_leq` for high-unusual and two-sided bands.
    '''

    t_obs: float
    t_repro: np.ndarray
    count_leq: int
    count_geq: int
    theta: np.ndarray

    @property
    def R(self):
        return self.t_repro.shape[0]

# ==========
# OPERATIONS
# ==========

def _sample_seed(model, master_seed, purpose, index):

    data, dp = model.sample_seed(
        stream(master_seed, purpose, index, DATA_SLOT),
        stream(master_seed, purpose, index, DP_SLOT))

    return (np.asarray(data, dtype=float).reshape(model.data_dims),
            np.asarray(dp, dtype=float).reshape(model.dp_dims))

def draw_seed_bank(model, R, master_seed, purpose=BANK_STREAM):
    '''Draw R seeds from the model's seed distribution.
    '''

    if int(R) < 1:
        raise InvalidArgumentError(f'R must be positive, got {R}')

    draws = [_sample_seed(model, master_seed, purpose, i) for i in range(int(R))]
    data = np.stack([d for d, _ in draws]).reshape(int(R), model.data_dims)
    dp = np.stack([p for _, p in draws]).reshape(int(R), model.dp_dims)

    logger.debug('drew bank of %d seeds for %s (seed=%d)',
            R, model.name, master_seed)

    return SeedBank(data, dp, int(master_seed))

def check_theta(model, theta):

    theta = np.asarray(theta, dtype=float).reshape(-1)
    if not model.param_box.contains(theta):
        raise InvalidArgumentError(
            f'theta={theta.tolist()} lies outside the parameter box of {model.name}')
    return theta

def generate_bank(model, theta, bank):
    '''Evaluate G(θ, u_i) for every seed of the bank; returns (R, d).
    '''

    theta = check_theta(model, theta)
    with np.errstate(all='ignore'):
        out = np.asarray(model.generator(theta, bank.data, bank.dp), dtype=float)

    out = out.reshape(bank.R, model.summary_dim)
    if not np.all(np.isfinite(out)):
        raise ReproNumericError(f'{model.name} produced non-finite summaries',
                theta)

    return out

def generate(model, theta, seed):
    '''G(θ, u) for a single seed.
    '''

    bank = SeedBank(np.asarray(seed.data_part)[None, :],
            np.asarray(seed.dp_part)[None, :], 0)
    return Summary(generate_bank(model, theta, bank)[0])

def draw_observation(model, theta, master_seed):
    '''Draw an observed release at θ from the observation stream. Models
    with an `observer` (alternative data for power studies) use it.
    '''

    theta = check_theta(model, theta)
    data_rng = stream(master_seed, OBSERVATION_STREAM, 0, DATA_SLOT)
    dp_rng = stream(master_seed, OBSERVATION_STREAM, 0, DP_SLOT)

    if getattr(model, 'observer', None) is not None:
        return Summary(model.observer(theta, data_rng, dp_rng))

    data, dp = model.sample_seed(data_rng, dp_rng)
    return generate(model, theta, Seed(data, dp))

def rank_at(model, statistic, theta, s_obs, bank):
    '''Ranks of T_obs among T_1..T_R at θ, with s_obs always part of the
    conditioning list. Ties count as ≤ (and as ≥).
    '''

    if bank.R < 1:
        raise InvalidArgumentError('bank must be nonempty')

    theta = check_theta(model, theta)
    s_obs = as_summary(s_obs)
    repro = generate_bank(model, theta, bank)

    points = np.vstack([s_obs.values[None, :], repro])
    values, scores = statistic.evaluate(theta, points)

    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(scores))):
        raise ReproNumericError('test statistic is not finite', theta)

    values = np.clip(values, 0.0, 1.0)

    return RankResult(
        t_obs=float(values[0]),
        t_repro=values[1:],
        count_leq=int(np.count_nonzero(scores[1:] <= scores[0])),
        count_geq=int(np.count_nonzero(scores[1:] >= scores[0])),
        theta=theta)
