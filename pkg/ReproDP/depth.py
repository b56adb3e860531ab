#!/usr/bin/env python3
'''Permutation-invariant test statistics.

A statistic is evaluated on the full conditioning list (s_obs, s_1, ...,
s_R) and returns two arrays: `values` in [0, 1] (low means unusual for
depths) and `scores`, an order-equivalent version of the values used for
rank counting. Scores avoid the ties that saturation of the normal cdf
would otherwise create.
'''

import logging
from dataclasses import dataclass
from math import comb
from typing import Callable
import numpy as np
from scipy.special import ndtr
from ReproDP.errors import (InvalidArgumentError, ReproNumericError,
        DegenerateCovarianceError)

logger = logging.getLogger(__name__)

LOW_UNUSUAL = 'low_unusual'
HIGH_UNUSUAL = 'high_unusual'
TWO_SIDED = 'two_sided'
ORIENTATIONS = (LOW_UNUSUAL, HIGH_UNUSUAL, TWO_SIDED)

DEPTH_KINDS = ('mahalanobis', 'halfspace', 'simplicial', 'spatial')

CONDITION_LIMIT = 1e12
RIDGE_FACTOR = 1e-10
ANGLE_TOL = 1e-12

@dataclass(frozen=True)
class TestStatistic:
    '''`score(theta, points)` returns raw scores for every row of the
    conditioning list; `normalize` maps them monotonically into [0, 1].
    '''

    __test__ = False

    kind: str
    orientation: str
    score: Callable
    normalize: Callable = None
    label: str = ''

    def __post_init__(self):

        if self.orientation not in ORIENTATIONS:
            raise InvalidArgumentError(f'unknown orientation {self.orientation!r}')

    @property
    def band_side(self):
        '''Side of the order-statistic band the values are read against.
        Two-sided pivots are folded already, so their values are low
        unusual.
        '''

        if self.kind == 'pivot' and self.orientation == TWO_SIDED:
            return LOW_UNUSUAL
        return self.orientation

    def evaluate(self, theta, points):

        points = np.atleast_2d(np.asarray(points, dtype=float))
        scores = np.asarray(self.score(theta, points), dtype=float).reshape(-1)
        values = scores if self.normalize is None else \
            np.asarray(self.normalize(scores), dtype=float).reshape(-1)

        return values, scores

    def __call__(self, theta, points):
        return self.evaluate(theta, points)[0]

# ===========
# MAHALANOBIS
# ===========

def _location_precision(X):

    m, d = X.shape
    if m < d + 1:
        raise InvalidArgumentError(
            f'mahalanobis depth needs at least {d + 1} points, got {m}')

    mean = X.mean(axis=0)
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))

    if not np.all(np.isfinite(cov)):
        raise DegenerateCovarianceError('covariance is not finite')

    if np.linalg.cond(cov) > CONDITION_LIMIT:
        ridge = RIDGE_FACTOR * np.trace(cov) / d
        if not ridge > 0:
            raise DegenerateCovarianceError('covariance has zero trace')
        logger.debug('covariance ill-conditioned, adding ridge %.3g', ridge)
        cov = cov + ridge * np.eye(d)

    try:
        precision = np.linalg.inv(cov)
    except np.linalg.LinAlgError:
        raise DegenerateCovarianceError('covariance is singular after ridge')

    return mean, precision

def _mahalanobis_all(X):

    mean, precision = _location_precision(X)
    centered = X - mean
    quad = np.einsum('ij,jk,ik->i', centered, precision, centered)

    return 1.0 / (1.0 + np.maximum(quad, 0.0))

def mahalanobis_depth(x, X):
    '''[1 + (x-μ)'Σ⁻¹(x-μ)]⁻¹ with the sample mean and (n-1) covariance
    of X.
    '''

    X = np.atleast_2d(np.asarray(X, dtype=float))
    mean, precision = _location_precision(X)
    centered = np.asarray(x, dtype=float).reshape(-1) - mean

    return float(1.0 / (1.0 + max(centered @ precision @ centered, 0.0)))

# =========
# HALFSPACE
# =========

def _angles(x, X):
    '''Sorted angles of the non-coincident points around x, doubled for
    circular searches, and the number of coincident points.
    '''

    diff = X - x
    coincident = np.all(diff == 0, axis=1)
    diff = diff[~coincident]
    ang = np.sort(np.mod(np.arctan2(diff[:, 1], diff[:, 0]), 2 * np.pi))

    return ang, np.concatenate([ang, ang + 2 * np.pi]), int(coincident.sum())

def _halfspace_count(x, X, closed=True):

    if X.shape[1] == 1:
        v, x = X[:, 0], x[0]
        if closed:
            return min(np.count_nonzero(v <= x), np.count_nonzero(v >= x))
        return np.count_nonzero(v == x) + \
            min(np.count_nonzero(v < x), np.count_nonzero(v > x))

    ang, ext, coincident = _angles(x, X)
    if ang.size == 0:
        return coincident

    # Points with relative angle in (0, pi] (closed) or (0, pi) (open)
    lo = np.searchsorted(ext, ang, side='right')
    hi = np.searchsorted(ext, ang + np.pi, side='right' if closed else 'left')

    return coincident + int((hi - lo).min())

def halfspace_depth(x, X, closed=True):
    '''Tukey depth: smallest fraction of X in a halfspace whose boundary
    passes through x. With `closed=False` points on the boundary line are
    not counted (points coincident with x always are).
    '''

    X = np.atleast_2d(np.asarray(X, dtype=float))
    x = np.asarray(x, dtype=float).reshape(-1)
    if X.shape[1] > 2:
        raise InvalidArgumentError('exact halfspace depth is limited to d <= 2')

    return _halfspace_count(x, X, closed) / X.shape[0]

# ==========
# SIMPLICIAL
# ==========

def _simplicial_count(x, X):

    m = X.shape[0]

    if X.shape[1] == 1:
        v, x = X[:, 0], x[0]
        below, above = np.count_nonzero(v < x), np.count_nonzero(v > x)
        return comb(m, 2) - comb(int(below), 2) - comb(int(above), 2)

    ang, ext, coincident = _angles(x, X)
    rest = m - coincident

    # Triangles with a vertex at x contain it
    count = comb(m, 3) - comb(rest, 3)
    if rest < 3:
        return count

    # Triples inside an open half-plane, each counted from its first point
    # in sorted order; tied angles are ordered by index
    lo = np.arange(1, rest + 1)
    hi = np.searchsorted(ext, ang + np.pi - ANGLE_TOL, side='left')
    k = hi - lo
    outside = int(np.sum(k * (k - 1) // 2))

    return count + comb(rest, 3) - outside

def simplicial_depth(x, X):
    '''Fraction of closed simplices (intervals in 1-D, triangles in 2-D)
    spanned by points of X that contain x.
    '''

    X = np.atleast_2d(np.asarray(X, dtype=float))
    x = np.asarray(x, dtype=float).reshape(-1)
    m, d = X.shape
    if d > 2:
        raise InvalidArgumentError('exact simplicial depth is limited to d <= 2')
    if m < d + 1:
        raise InvalidArgumentError(f'simplicial depth needs at least {d + 1} points')

    return _simplicial_count(x, X) / comb(m, d + 1)

# =======
# SPATIAL
# =======

def _spatial_all(queries, X):

    diff = queries[:, None, :] - X[None, :, :]
    norms = np.linalg.norm(diff, axis=2, keepdims=True)
    with np.errstate(invalid='ignore', divide='ignore'):
        units = np.where(norms > 0, diff / norms, 0.0)

    return 1.0 - np.linalg.norm(units.mean(axis=1), axis=1)

def spatial_depth(x, X):
    '''1 - || mean of unit vectors (x - X_j)/||x - X_j|| ||.
    '''

    X = np.atleast_2d(np.asarray(X, dtype=float))
    x = np.asarray(x, dtype=float).reshape(1, -1)

    return float(np.clip(_spatial_all(x, X)[0], 0.0, 1.0))

# ==========
# STATISTICS
# ==========

def _depth_scores(kind, closed):

    if kind == 'mahalanobis':
        return lambda theta, P: _mahalanobis_all(P)

    if kind == 'halfspace':
        return lambda theta, P: np.array(
            [_halfspace_count(p, P, closed) for p in P]) / P.shape[0]

    if kind == 'simplicial':
        def simplicial(theta, P):
            total = comb(P.shape[0], P.shape[1] + 1)
            return np.array([_simplicial_count(p, P) for p in P]) / total
        return simplicial

    return lambda theta, P: np.clip(_spatial_all(P, P), 0.0, 1.0)

def depth_statistic(kind, model, closed=True):
    '''Depth of each point relative to the whole conditioning list.
    `model` may also be the summary dimension itself.
    '''

    d = model if isinstance(model, (int, np.integer)) else model.summary_dim

    if kind not in DEPTH_KINDS:
        raise InvalidArgumentError(
            f'unknown depth {kind!r}; expected one of {DEPTH_KINDS}')
    if kind in ('halfspace', 'simplicial') and d > 2:
        raise InvalidArgumentError(f'{kind} depth is exact only for d <= 2, got d={d}')

    return TestStatistic(kind, LOW_UNUSUAL, _depth_scores(kind, closed),
            label=f'{kind} depth')

def scalar_statistic(side=TWO_SIDED, model=None):
    '''T = Φ(s) for one-dimensional summaries.
    '''

    if model is not None and model.summary_dim != 1:
        raise InvalidArgumentError(
            f'scalar statistic needs a 1-D summary, got d={model.summary_dim}')

    def score(theta, P):
        if P.shape[1] != 1:
            raise InvalidArgumentError(f'scalar statistic needs d=1, got d={P.shape[1]}')
        return P[:, 0]

    return TestStatistic('scalar', side, score, ndtr, label='scalar')

def pivot_statistic(f, orientation=TWO_SIDED, label='pivot'):
    '''Wrap a pivot f(θ, s) through Φ. The two-sided wrap maps t to
    1 - |2Φ(t) - 1| so that large |t| is unusual.
    '''

    def raw(theta, P):

        t = np.asarray(f(theta, P), dtype=float)
        if t.shape != (P.shape[0],):
            t = np.array([f(theta, p) for p in P], dtype=float).reshape(-1)
        if not np.all(np.isfinite(t)):
            raise ReproNumericError(f'{label} is not finite', theta)
        return t

    if orientation == TWO_SIDED:
        return TestStatistic('pivot', orientation,
                lambda theta, P: -np.abs(raw(theta, P)),
                lambda s: 2 * ndtr(s), label=label)

    return TestStatistic('pivot', orientation, raw, ndtr, label=label)
