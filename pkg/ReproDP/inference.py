#!/usr/bin/env python3
'''Acceptance tests, confidence intervals, confidence grids and p-values
built on the rank objective

    M(θ) = #{T_i(θ) <= T_obs(θ)} + 1 + T_obs(θ)

maximized over a parameter region with a multi-start derivative-free
optimizer. Every call shares one seed bank.
'''

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil, floor
from typing import NamedTuple
import numpy as np
from scipy import optimize
from scipy.stats import norm, qmc
from ReproDP.depth import LOW_UNUSUAL, HIGH_UNUSUAL, TWO_SIDED, ORIENTATIONS
from ReproDP.engine import ParamBox, rank_at, as_summary
from ReproDP.errors import (ReproError, InvalidArgumentError,
        InfeasibleBandError, ReproNumericError, UnboundedGridError)

logger = logging.getLogger(__name__)

# =========
# CONSTANTS
# =========

DEFAULT_TOL = 1e-3
DEFAULT_RESOLUTION = 40
MAX_DOUBLINGS = 60
MAX_ENUMERATION = 100000
EVAL_CACHE = 65536

NELDER_MEAD = 'nelder_mead_box'
QUASI_NEWTON = 'quasi_newton_box'

# Keeps the continuous term below 1 so it never covers an integer deficit
_CONTINUOUS_CAP = 1.0 - 1e-12

def _floor(x):
    return floor(x + 1e-9)

def _ceil(x):
    return ceil(x - 1e-9)

# =====
# BANDS
# =====

@dataclass(frozen=True)
class Band:
    '''Accept when T_obs lies between the a-th and b-th order statistics
    of the R+1 values.
    '''

    a: int
    b: int
    alpha: float
    R: int
    side: str = LOW_UNUSUAL

def choose_band(alpha, R, side=LOW_UNUSUAL):

    if not 0 < alpha < 1:
        raise InvalidArgumentError(f'alpha must lie in (0, 1), got {alpha}')
    if side not in ORIENTATIONS:
        raise InvalidArgumentError(f'unknown band side {side!r}')

    n = int(R) + 1
    if alpha * n < 1 - 1e-9:
        raise InfeasibleBandError(
            f'alpha={alpha} is below 1/(R+1)={1 / n:.4g}; increase R')

    coverage = _ceil((1 - alpha) * n)

    if side == LOW_UNUSUAL:
        a, b = _floor(alpha * n) + 1, n
    elif side == HIGH_UNUSUAL:
        a, b = 1, coverage
    else:
        a = max(_floor(alpha / 2 * n), 1)
        b = a + coverage - 1

    return Band(a, b, alpha, int(R), side)

# =========
# OPTIMIZER
# =========

@dataclass(frozen=True)
class OptimizerSpec:
    '''Multi-start settings. Starts are the warm starts followed by a
    Latin hypercube of `n_starts` points over the free coordinates, and
    a regular lattice of `lattice` points per axis when nonzero.
    '''

    n_starts: int = 8
    max_evals: int = 400
    method: str = NELDER_MEAD
    seed: int = 0
    simplex_scale: float = 0.1
    lattice: int = 0

    def __post_init__(self):

        if self.n_starts < 1:
            raise InvalidArgumentError(f'n_starts must be positive, got {self.n_starts}')
        if self.max_evals < 1:
            raise InvalidArgumentError(f'max_evals must be positive, got {self.max_evals}')
        if self.method not in (NELDER_MEAD, QUASI_NEWTON):
            raise InvalidArgumentError(f'unknown optimizer method {self.method!r}')

    @classmethod
    def paranoid(cls, base=None):
        '''Denser search for users worried about missed regions.
        '''

        base = base or cls()
        return cls(n_starts=4 * base.n_starts,
                max_evals=max(1000, base.max_evals), method=base.method,
                seed=base.seed, simplex_scale=base.simplex_scale, lattice=9)

class RankOptimum(NamedTuple):

    theta: np.ndarray
    value: float
    evaluations: int
    hit_target: bool

class _TargetReached(Exception):
    pass

class _Tracker:
    '''Counts evaluations, keeps the best point and stops the search once
    a target value is reached. Failed evaluations score -inf.
    '''

    def __init__(self, objective, target=None):

        self.objective = objective
        self.target = target
        self.best_theta = None
        self.best_value = -np.inf
        self.evaluations = 0
        self.failures = 0

    def __call__(self, theta):

        self.evaluations += 1
        try:
            value = float(self.objective(theta))
        except ReproError as e:
            logger.debug('objective failed at %s: %s', theta.tolist(), e)
            value = np.nan

        if not np.isfinite(value):
            self.failures += 1
            return -np.inf

        if value > self.best_value:
            self.best_value, self.best_theta = value, theta.copy()

        if self.target is not None and value >= self.target:
            raise _TargetReached()

        return value

def _local_search(tracker, x0, free, lo, hi, opt):

    width = (hi - lo)[free]
    z0 = x0[free]

    def negative(z):
        x = x0.copy()
        x[free] = np.clip(z, lo[free], hi[free])
        return -tracker(x)

    if opt.method == QUASI_NEWTON:
        optimize.minimize(negative, z0, method='L-BFGS-B',
                bounds=list(zip(lo[free], hi[free])),
                options={'maxfun': opt.max_evals,
                    'eps': 1e-3 * float(width.min())})
        return

    # Initial simplex scaled to the region, stepping inward at the upper edge
    simplex = [z0]
    for i, w in enumerate(width):
        step = opt.simplex_scale * w
        vertex = z0.copy()
        vertex[i] = z0[i] + step if z0[i] + step <= hi[free][i] else z0[i] - step
        simplex.append(vertex)

    optimize.minimize(negative, z0, method='Nelder-Mead',
            options={'maxfev': opt.max_evals, 'initial_simplex': np.array(simplex),
                'xatol': 1e-6 * float(width.max()), 'fatol': 1e-10})

def _starts(base, free, lo, hi, warm, opt, rng):

    k = int(free.sum())
    starts = []

    for w in warm:
        x = base.copy()
        x[free] = np.clip(np.asarray(w, dtype=float)[free], lo[free], hi[free])
        starts.append(x)

    for row in qmc.LatinHypercube(d=k, seed=rng).random(opt.n_starts):
        x = base.copy()
        x[free] = lo[free] + row * (hi - lo)[free]
        starts.append(x)

    if opt.lattice and opt.lattice**k <= 4096:
        axes = [np.linspace(l, h, opt.lattice) for l, h in zip(lo[free], hi[free])]
        for point in itertools.product(*axes):
            x = base.copy()
            x[free] = point
            starts.append(x)

    return starts

def optimize_rank(objective, region, opt=None, warm_starts=(), target=None,
        seed=0):
    '''Maximize `objective` over the search window of `region`.

    Integer coordinates are enumerated; degenerate coordinates stay
    fixed; the remaining ones are searched from every start. With a
    `target` the search stops at the first value reaching it.
    '''

    opt = opt or OptimizerSpec()
    lo = np.array(region.search_lower, dtype=float)
    hi = np.array(region.search_upper, dtype=float)
    integer = region.integer_mask

    free = ~integer & (hi > lo)
    int_idx = np.flatnonzero(integer)
    int_values = [np.arange(ceil(lo[i]), floor(hi[i]) + 1, dtype=float)
        for i in int_idx]

    if any(v.size == 0 for v in int_values):
        raise InvalidArgumentError('region contains no admissible integer point')
    if int(np.prod([v.size for v in int_values])) > MAX_ENUMERATION:
        raise InvalidArgumentError(
            'integer coordinates span too many values to enumerate; narrow the box')

    tracker = _Tracker(objective, target)
    rng = np.random.default_rng([int(opt.seed), int(seed)])
    hit = False

    try:
        for combo in itertools.product(*int_values):

            base = lo.copy()
            base[int_idx] = combo
            if not free.any():
                tracker(base)
                continue

            warm = []
            for w in warm_starts:
                w = np.array(w, dtype=float)
                w[int_idx] = combo
                warm.append(w)

            for x0 in _starts(base, free, lo, hi, warm, opt, rng):
                _local_search(tracker, x0, free, lo, hi, opt)

    except _TargetReached:
        hit = True

    if tracker.best_theta is None:
        raise ReproNumericError(
            f'no finite objective value in {tracker.evaluations} evaluations')

    logger.debug('optimizer: best %.6g after %d evaluations (%d failed)%s',
            tracker.best_value, tracker.evaluations, tracker.failures,
            ', target reached' if hit else '')

    return RankOptimum(tracker.best_theta, tracker.best_value,
            tracker.evaluations, hit)

# ======
# ACCEPT
# ======

def _continuous(t):
    return min(max(t, 0.0), _CONTINUOUS_CAP)

def acceptance_objective(model, statistic, s_obs, bank, band):
    '''Objective and threshold of the acceptance test. Low-unusual
    statistics use the rank objective directly; the other sides mirror
    it onto the upper tail or take the worse of both tails.
    '''

    side, n = band.side, bank.R + 1

    def objective(theta):

        rank = rank_at(model, statistic, theta, s_obs, bank)
        low = rank.count_leq + 1 + _continuous(rank.t_obs)
        high = rank.count_geq + 1 + _continuous(1 - rank.t_obs)

        if side == LOW_UNUSUAL: return low
        if side == HIGH_UNUSUAL: return high
        return min(low - band.a, high - (n + 1 - band.b))

    if side == LOW_UNUSUAL:
        threshold = band.a
    elif side == HIGH_UNUSUAL:
        threshold = n + 1 - band.b
    else:
        threshold = 0

    return objective, threshold

def _memoized(objective, maxsize=EVAL_CACHE):
    '''`objective` with its values cached by the exact bytes of θ.
    '''

    cached = lru_cache(maxsize=maxsize)(
        lambda key: objective(np.frombuffer(key).copy()))

    return lambda theta: cached(np.asarray(theta, dtype=float).tobytes())

class Decision(NamedTuple):

    accepted: bool
    theta: np.ndarray
    value: float

class AcceptanceSearch:
    '''Acceptance decisions for one (model, statistic, s_obs, bank, α).

    Points found acceptable are kept and offered as warm starts to later
    searches, projected onto their region. Objective values are cached
    across searches.
    '''

    def __init__(self, model, statistic, s_obs, bank, alpha, opt=None):

        self.model = model
        self.bank = bank
        self.opt = opt or OptimizerSpec()
        self.band = choose_band(alpha, bank.R, statistic.band_side)
        objective, self.threshold = acceptance_objective(
            model, statistic, as_summary(s_obs), bank, self.band)
        self.objective = _memoized(objective)
        self.anchors = []
        self.calls = 0
        self.evaluations = 0

    def run(self, region, warm_starts=()):

        warm = list(warm_starts) + self.anchors[-4:][::-1]
        result = optimize_rank(self.objective, region, self.opt, warm,
                target=self.threshold, seed=self.bank.master_seed)

        accepted = result.value >= self.threshold
        if accepted:
            self.anchors.append(result.theta)

        self.calls += 1
        self.evaluations += result.evaluations
        logger.debug('accept [%s, %s] -> %s (M=%.4g, threshold %s)',
                region.lower.tolist(), region.upper.tolist(), accepted,
                result.value, self.threshold)

        return Decision(bool(accepted), result.theta, result.value)

def _as_region(model, theta_set):

    if isinstance(theta_set, ParamBox):
        return theta_set
    return model.param_box.point(theta_set)

def accept(theta_set, alpha, bank, model, statistic, s_obs, opt=None):
    '''True when some θ in `theta_set` (a box or a single point) reaches
    the band threshold.
    '''

    search = AcceptanceSearch(model, statistic, s_obs, bank, alpha, opt)
    return search.run(_as_region(model, theta_set)).accepted

# ===================
# CONFIDENCE INTERVAL
# ===================

@dataclass(frozen=True)
class ConfidenceInterval:

    lower: float
    upper: float
    empty: bool
    alpha: float
    R: int
    tol: float
    master_seed: int
    coord: str = ''
    accept_calls: int = 0
    evaluations: int = 0

    @property
    def width(self):
        return None if self.empty else self.upper - self.lower

    def contains(self, value):
        return not self.empty and self.lower <= value <= self.upper

def _coordinate(box, coord):

    if coord is None:
        j = box.interest_index if box.interest_index is not None else 0
    elif isinstance(coord, str):
        j = box.index_of(coord)
    else:
        j = int(coord)

    if not 0 <= j < box.dim:
        raise InvalidArgumentError(f'coordinate {coord} outside dimension {box.dim}')
    if box.integer[j]:
        raise InvalidArgumentError(
            f'intervals for the integer coordinate {box.names[j]} are not supported')

    return j

def _lower_limit(search, box, j, beta, tol):

    lo_b = box.lower[j]

    if np.isfinite(lo_b):
        if search.run(box.restrict(j, lo_b, lo_b)).accepted:
            return lo_b
        lo = lo_b
    else:
        c = min(-1.0, beta)
        for _ in range(MAX_DOUBLINGS):
            if not search.run(box.restrict(j, 2 * c, c)).accepted:
                break
            c *= 2
        else:
            return -np.inf
        lo = c

    hi = beta
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if search.run(box.restrict(j, lo, mid)).accepted: hi = mid
        else: lo = mid

    return lo

def _upper_limit(search, box, j, beta, tol):

    hi_b = box.upper[j]

    if np.isfinite(hi_b):
        if search.run(box.restrict(j, hi_b, hi_b)).accepted:
            return hi_b
        hi = hi_b
    else:
        c = max(1.0, beta)
        for _ in range(MAX_DOUBLINGS):
            if not search.run(box.restrict(j, c, 2 * c)).accepted:
                break
            c *= 2
        else:
            return np.inf
        hi = c

    lo = beta
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if search.run(box.restrict(j, mid, hi)).accepted: lo = mid
        else: hi = mid

    return hi

def confidence_interval(alpha, box, bank, model, statistic, s_obs,
        tol=DEFAULT_TOL, opt=None, coord=None, search=None):
    '''Bisection search for the projection of the confidence set onto
    one coordinate (the interest coordinate by default).

    Infinite bounds are bracketed by logarithmic doubling; a side that
    is still accepted after the last doubling is reported as infinite.
    '''

    if not (np.isfinite(tol) and tol > 0):
        raise InvalidArgumentError(f'tol must be positive and finite, got {tol}')

    j = _coordinate(box, coord)
    search = search or AcceptanceSearch(model, statistic, s_obs, bank, alpha, opt)
    calls, evals = search.calls, search.evaluations

    def result(lower, upper, empty=False):
        return ConfidenceInterval(float(lower), float(upper), empty, alpha,
                bank.R, tol, bank.master_seed, box.names[j],
                search.calls - calls, search.evaluations - evals)

    init = search.run(box)
    if not init.accepted:
        logger.info('no acceptable %s in the box; interval is empty', box.names[j])
        return result(np.nan, np.nan, True)

    beta = float(init.theta[j])
    lower = _lower_limit(search, box, j, beta, tol)
    upper = _upper_limit(search, box, j, beta, tol)

    logger.info('%s interval [%g, %g] after %d accept calls', box.names[j],
            lower, upper, search.calls - calls)

    return result(lower, upper)

# ===============
# CONFIDENCE GRID
# ===============

@dataclass(frozen=True)
class GridResult:

    cells: tuple
    bounding_box: tuple
    resolution: int
    intervals: tuple = field(default_factory=tuple)

    @property
    def area(self):
        '''Total volume of the accepted cells.
        '''
        return float(sum(np.prod(hi - lo) for lo, hi in self.cells))

def confidence_grid(alpha, box, bank, model, statistic, s_obs,
        r=DEFAULT_RESOLUTION, opt=None, tol=DEFAULT_TOL):
    '''Accepted cells of an r^d grid over the product of the coordinate
    intervals, all computed with the same bank.
    '''

    if int(r) < 1:
        raise InvalidArgumentError(f'grid resolution must be positive, got {r}')
    r = int(r)

    search = AcceptanceSearch(model, statistic, s_obs, bank, alpha, opt)
    intervals = tuple(
        confidence_interval(alpha, box, bank, model, statistic, s_obs, tol,
            coord=i, search=search)
        for i in range(box.dim))

    if any(ci.empty for ci in intervals):
        return GridResult((), None, r, intervals)

    if any(not np.isfinite([ci.lower, ci.upper]).all() for ci in intervals):
        raise UnboundedGridError(
            'a coordinate interval is infinite; clamp the box before gridding')

    lower = np.array([ci.lower for ci in intervals])
    upper = np.array([ci.upper for ci in intervals])
    edges = [np.linspace(l, u, r + 1) for l, u in zip(lower, upper)]

    cells = []
    for index in itertools.product(range(r), repeat=box.dim):

        lo = np.array([edges[i][k] for i, k in enumerate(index)])
        hi = np.array([edges[i][k + 1] for i, k in enumerate(index)])

        if search.run(box.cell(lo, hi), warm_starts=[(lo + hi) / 2]).accepted:
            cells.append((lo, hi))

    logger.info('grid: %d of %d cells accepted', len(cells), r**box.dim)

    return GridResult(tuple(cells), (lower, upper), r, intervals)

# =======
# P-VALUE
# =======

@dataclass(frozen=True)
class PValueResult:
    '''`theta_hat` maximizes the rank objective over the null region: the
    parameter under which the release looks least unusual.
    '''

    p: float
    M: float
    early_stopped: bool
    theta_hat: np.ndarray
    R: int

    def __float__(self):
        return self.p

def pvalue(theta_null, bank, model, statistic, s_obs, opt=None,
        significance=None, warm_starts=()):
    '''p = min(floor(M) + 1, R + 1)/(R + 1) with M the supremum of
    #{T_i <= T_obs} + T_obs over the null region. With `significance`
    the search stops once some θ gives p above it.
    '''

    side = statistic.band_side
    if side == TWO_SIDED:
        raise InvalidArgumentError(
            'p-values need a one-sided statistic; wrap the pivot two-sided instead')
    if theta_null is None:
        raise InvalidArgumentError('null region is empty')

    region = _as_region(model, theta_null)
    s_obs = as_summary(s_obs)
    n = bank.R + 1

    def objective(theta):
        rank = rank_at(model, statistic, theta, s_obs, bank)
        if side == LOW_UNUSUAL:
            return rank.count_leq + _continuous(rank.t_obs)
        return rank.count_geq + _continuous(1 - rank.t_obs)

    target = None if significance is None else _floor(significance * n)
    result = optimize_rank(objective, region, opt, warm_starts, target,
            seed=bank.master_seed)

    p = min(floor(result.value) + 1, n) / n
    if result.hit_target:
        logger.info('p-value search stopped early: p=%g exceeds %g', p, significance)

    return PValueResult(p, result.value, result.hit_target, result.theta, bank.R)

# ============
# OVERCOVERAGE
# ============

def overcoverage_relative_width(alpha, d):
    '''Width inflation of a normal-mean interval that covers a
    d-dimensional set coordinatewise: z_{1-α*/2}/z_{1-α/2} with
    α* = 1 - (1-α)^{1/d}.
    '''

    if not 0 < alpha < 1 or d < 1:
        raise InvalidArgumentError(f'need alpha in (0, 1) and d >= 1, got {alpha}, {d}')

    alpha_star = -np.expm1(np.log1p(-alpha) / d)
    return float(norm.isf(alpha_star / 2) / norm.isf(alpha / 2))
