#!/usr/bin/env python3
'''Differential privacy building blocks.

Every mechanism is a deterministic function of its input statistic and
a slice of seed values, so replaying a seed reproduces a release bit for
bit. Noise that needs a variable amount of randomness (K-norm rejection)
takes a numpy Generator derived from a counter stream instead.
'''

import logging
from dataclasses import dataclass
from typing import Callable
import numpy as np
from scipy import stats
from ReproDP.errors import (InvalidArgumentError, ReproNumericError,
        PathologicalBallError)

logger = logging.getLogger(__name__)

LAPLACE = 'laplace'
GAUSSIAN = 'gaussian'

MAX_PROPOSALS = 10**6
MIN_ACCEPTANCE_RATE = 1e-4

# ========
# CLAMPING
# ========

def clamp(x, a, b):
    '''Project x onto [a, b]; works elementwise on arrays.
    '''

    if a > b:
        raise InvalidArgumentError(f'clamp bounds reversed: {a} > {b}')

    clipped = np.clip(x, a, b)
    return clipped.item() if np.ndim(clipped) == 0 else clipped

# =====
# TULAP
# =====

def geometric_failures(u, q):
    '''Inverse cdf of the geometric distribution counting failures before
    the first success, P(G >= k) = q**k.
    '''

    u = np.asarray(u, dtype=float)
    with np.errstate(divide='ignore'):
        g = np.ceil(np.log1p(-u) / np.log(q)) - 1

    return np.maximum(g, 0.0)

def sample_tulap(rng_slice, epsilon=1.0):
    '''One Tulap(0, exp(-epsilon), 0) draw N = G1 - G2 + U.

    `rng_slice` holds three uniforms (two geometrics and U + 1/2); a
    trailing axis of length 3 is vectorized over. A numpy Generator may
    be passed instead, in which case three uniforms are drawn from it.
    '''

    if isinstance(rng_slice, np.random.Generator):
        rng_slice = rng_slice.random(3)

    u = np.asarray(rng_slice, dtype=float)
    if u.shape[-1] != 3:
        raise InvalidArgumentError('tulap needs three uniform seeds')

    q = np.exp(-epsilon)
    noise = geometric_failures(u[..., 0], q) \
        - geometric_failures(u[..., 1], q) + (u[..., 2] - 0.5)

    return noise.item() if np.ndim(noise) == 0 else noise

def tulap_cdf(x, b):
    '''Closed-form cdf of Tulap(0, b, 0).
    '''

    x = np.asarray(x, dtype=float)
    k = np.round(x)
    below = b**(-k) / (1 + b) * (b + (x - k + 0.5) * (1 - b))
    above = 1 - b**k / (1 + b) * (b + (k - x + 0.5) * (1 - b))

    out = np.where(x <= 0, below, above)
    return out.item() if out.ndim == 0 else out

# ==================
# ADDITIVE MECHANISM
# ==================

def laplace_from_uniform(u):
    '''Laplace(0, 1) quantile.
    '''

    u = np.asarray(u, dtype=float)
    return -np.sign(u - 0.5) * np.log1p(-2 * np.abs(u - 0.5))

def additive_mechanism(stat, scale, kind, dp_seeds):
    '''stat + scale * noise. Laplace noise comes from uniform seeds via
    the inverse cdf; Gaussian seeds are stored as z-values.
    '''

    if not scale > 0:
        raise InvalidArgumentError(f'noise scale must be positive, got {scale}')

    stat = np.asarray(stat, dtype=float)
    dp_seeds = np.asarray(dp_seeds, dtype=float)
    if dp_seeds.shape != stat.shape:
        raise InvalidArgumentError(
            f'{dp_seeds.shape} seeds supplied for a statistic of shape {stat.shape}')

    if kind == LAPLACE:
        noise = laplace_from_uniform(dp_seeds)
    elif kind == GAUSSIAN:
        noise = dp_seeds
    else:
        raise InvalidArgumentError(f'unknown noise kind {kind!r}')

    return stat + scale * noise

def compose_gdp(mus):
    '''Privacy parameter of the composition of mu_i-GDP releases.
    '''

    return float(np.sqrt(np.sum(np.square(mus))))

# ===================
# L-INFINITY DENSITY
# ===================

def sample_linf_density(c, m, seeds):
    '''V with density proportional to exp(-c ||V||_inf).

    `seeds` holds m uniforms for the direction (mapped onto (-1, 1)) and
    one uniform for the Gamma(m+1, rate c) radius; leading axes are
    vectorized over.
    '''

    if not c > 0 or m < 1:
        raise InvalidArgumentError(f'need c > 0 and m >= 1, got c={c}, m={m}')

    seeds = np.asarray(seeds, dtype=float)
    if seeds.shape[-1] != m + 1:
        raise InvalidArgumentError(f'expected {m + 1} seeds, got {seeds.shape[-1]}')

    direction = 2 * seeds[..., :m] - 1
    r = stats.gamma.ppf(seeds[..., m], m + 1, scale=1.0 / c)

    return r[..., None] * direction

# ======
# K-NORM
# ======

@dataclass(frozen=True)
class NormBall:
    '''Unit ball of a norm, given by its membership test and the
    half-width of an l-infinity box containing it.
    '''

    membership: Callable
    linf_radius: float
    label: str
    dim: int = 2

    def __contains__(self, u):
        return bool(self.membership(np.asarray(u, dtype=float)))

def _hull_membership(u, atol=1e-12):

    u = np.asarray(u, dtype=float)
    u1, u2 = u[..., 0], u[..., 1]

    left = (u1 <= -0.5) & ((u1 + 1)**2 - 1 <= u2 + atol) & (u2 <= -u1**2 + atol)
    middle = (u1 > -0.5) & (u1 <= 0.5) & \
        (u1 - 0.25 <= u2 + atol) & (u2 <= u1 + 0.25 + atol)
    right = (u1 >= 0.5) & (u1**2 <= u2 + atol) & (u2 <= 1 - (u1 - 1)**2 + atol)

    return left | middle | right

def hull_ball():
    '''Ball of the symmetrized convex hull of {(z, z^2): z in [0, 1]},
    the sensitivity space of T(X) = (sum z_i, sum z_i^2).
    '''

    return NormBall(_hull_membership, 1.0, 'moment-hull', 2)

def sample_knorm_noise(epsilon, delta_k, ball, rng, delta_inf=None,
        batch=1024):
    '''Noise N with density proportional to exp(-(epsilon/delta_k)||N||_K),
    by rejection from the delta_inf box.
    '''

    if not (epsilon > 0 and delta_k > 0):
        raise InvalidArgumentError('epsilon and delta_k must be positive')

    delta_inf = ball.linf_radius if delta_inf is None else delta_inf
    if delta_inf < ball.linf_radius:
        raise InvalidArgumentError(
            f'ball of radius {ball.linf_radius} does not fit in a box of {delta_inf}')

    m = ball.dim
    r = rng.gamma(m + 1, delta_k / epsilon)

    proposals = 0
    while proposals < MAX_PROPOSALS:
        u = rng.uniform(-delta_inf, delta_inf, size=(batch, m))
        hits = np.flatnonzero(ball.membership(u))
        if hits.size:
            proposals += int(hits[0]) + 1
            return r * u[hits[0]]
        proposals += batch

    raise PathologicalBallError(
        f'acceptance rate below {MIN_ACCEPTANCE_RATE} after {proposals} '
        f'proposals for ball {ball.label}')

def knorm_mechanism(stat, epsilon, delta_inf, delta_k, ball, rng):
    '''Release stat + N_K with the K-norm mechanism.
    '''

    stat = np.asarray(stat, dtype=float)
    return stat + sample_knorm_noise(epsilon, delta_k, ball, rng, delta_inf)

# ======================
# OBJECTIVE PERTURBATION
# ======================

@dataclass(frozen=True)
class ObjPertConfig:
    '''Objective perturbation settings. `lam` bounds the Hessian eigenvalues
    of the loss; the logistic loss meets 1/4, and m/4 (0.5 at m = 2) is
    the looser bound of the general construction. Both satisfy the
    privacy condition, the larger one with a larger ridge gamma.
    '''

    epsilon: float
    q: float = 0.85
    lam: float = 0.25
    delta_inf: float = 2.0
    m: int = 2

    def __post_init__(self):

        if not (self.epsilon > 0 and self.lam > 0 and self.delta_inf > 0):
            raise InvalidArgumentError(
                'objective perturbation needs positive epsilon, lambda and delta')
        if not 0 < self.q < 1:
            raise InvalidArgumentError(f'q must lie in (0, 1), got {self.q}')

    @property
    def gamma(self):
        return self.lam / np.expm1(self.epsilon * (1 - self.q))

    @property
    def noise_rate(self):
        '''c of the l-infinity density the perturbation V is drawn from.
        '''
        return self.epsilon * self.q / self.delta_inf

def _damped_newton(objective, theta0, tol=1e-8, max_iter=100):
    '''Minimize a batch of smooth convex objectives. `objective(theta)`
    returns (value, grad, hess) with a leading batch axis. Steps that
    fail to descend fall back to the negative gradient.
    '''

    theta = np.array(theta0, dtype=float)

    for _ in range(max_iter):

        f, g, H = objective(theta)
        active = np.linalg.norm(g, axis=1) > tol
        if not active.any():
            return theta

        try:
            step = -np.linalg.solve(H, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -g.copy()

        slope = np.einsum('bi,bi->b', g, step)
        bad = ~np.all(np.isfinite(step), axis=1) | (slope >= 0)
        step[bad] = -g[bad]
        slope = np.einsum('bi,bi->b', g, step)

        # Armijo backtracking, per batch member
        t = np.ones(theta.shape[0])
        for _ in range(60):
            f_new = objective(theta + t[:, None] * step)[0]
            ok = f_new <= f + 1e-4 * t * slope
            if ok.all(): break
            t = np.where(ok, t, 0.5 * t)

        theta = np.where(active[:, None], theta + t[:, None] * step, theta)

    f, g, H = objective(theta)
    if np.all(np.linalg.norm(g, axis=1) <= tol * 100):
        return theta

    raise ReproNumericError('objective perturbation solver did not converge')

def objective_perturbation(data, loss_grad_hess, cfg, regularizer, V):
    '''argmin L(θ; X) + r(θ)/n + (γ/2n)θᵀθ + Vᵀθ/n.

    `data` is a tuple of arrays whose last axis indexes the n records;
    `loss_grad_hess(theta, data)` returns the average loss with gradient
    and Hessian. A 2-D `V` solves one problem per row with matching
    leading axes in `data`. `regularizer` is None or a callable with the
    same return convention.
    '''

    V = np.asarray(V, dtype=float)
    single = V.ndim == 1
    V = np.atleast_2d(V)
    if V.shape[1] != cfg.m:
        raise InvalidArgumentError(f'perturbation has dimension {V.shape[1]}, expected {cfg.m}')

    n = np.shape(data[0])[-1]
    gamma = cfg.gamma

    def objective(theta):

        f, g, H = loss_grad_hess(theta, data)
        f = f + gamma / (2 * n) * np.sum(theta**2, axis=1) \
            + np.einsum('bi,bi->b', V, theta) / n
        g = g + (gamma * theta + V) / n
        H = H + gamma / n * np.eye(cfg.m)

        if regularizer is not None:
            rf, rg, rH = regularizer(theta)
            f, g, H = f + rf / n, g + rg / n, H + rH / n

        return f, g, H

    theta = _damped_newton(objective, np.zeros_like(V))
    return theta[0] if single else theta
