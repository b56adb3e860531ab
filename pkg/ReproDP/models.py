#!/usr/bin/env python3
'''Worked examples as generating equations s = G(θ, u).

Generators are vectorized over a bank: they receive θ plus the (R, k)
data and mechanism seed matrices and return the (R, d) repro summaries.
'''

import logging
from dataclasses import dataclass, field
from functools import partial
from math import ceil, floor, sqrt
from typing import Callable
import numpy as np
from scipy import stats
from scipy.special import betaincinv, expit, ndtri
from ReproDP.engine import ParamBox
from ReproDP.errors import InvalidArgumentError, ReproNumericError
from ReproDP import depth
from ReproDP.mechanisms import (additive_mechanism, laplace_from_uniform,
        sample_tulap, sample_linf_density, sample_knorm_noise, hull_ball,
        objective_perturbation, ObjPertConfig, LAPLACE, GAUSSIAN)

logger = logging.getLogger(__name__)

PURE_DP_LAPLACE = 'pure_dp_laplace'
GDP_GAUSSIAN = 'gdp_gaussian'

@dataclass(frozen=True, eq=False)
class ModelSpec:
    '''Generating equation plus the metadata inference needs.

    `search`, when present, narrows the box (and adjusts α) from the
    observed release before any interval or test is computed.
    `observer` draws observed releases from an alternative distribution.
    '''

    name: str
    param_box: ParamBox
    data_dims: int
    dp_dims: int
    summary_dim: int
    generator: Callable
    sample_seed: Callable
    default_statistic: depth.TestStatistic
    privacy_label: str
    params: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    estimator: Callable = None
    observer: Callable = None
    search: Callable = None

    @property
    def seed_layout(self):
        return self.data_dims, self.dp_dims

    @property
    def dim(self):
        return self.param_box.dim

    def statistic(self, kind='default'):
        '''Resolve a statistic by name: `default`, a model-specific
        statistic such as `pivot`, a depth kind or `scalar`.
        '''

        if kind in (None, 'default'):
            return self.default_statistic
        if kind in self.statistics:
            return self.statistics[kind]
        if kind in depth.DEPTH_KINDS:
            return depth.depth_statistic(kind, self)
        if kind == 'scalar':
            return depth.scalar_statistic(depth.TWO_SIDED, self)

        raise InvalidArgumentError(f'model {self.name} has no statistic {kind!r}')

    def search_region(self, s_obs, alpha):
        '''Box to search and the α to use for an observed release.
        '''

        if self.search is None:
            return self.param_box, alpha
        return self.search(np.asarray(s_obs, dtype=float), alpha)

def _require(condition, message):

    if not condition:
        raise InvalidArgumentError(message)

def _uniform_seed(data_rng, dp_rng, n, dp_kind, dp_dims):

    data = data_rng.random(n)
    dp = dp_rng.random(dp_dims) if dp_kind == LAPLACE \
        else dp_rng.standard_normal(dp_dims)
    return data, dp

def _noise(seeds, kind):

    return laplace_from_uniform(seeds) if kind == LAPLACE else seeds

# ==================
# BERNOULLI + TULAP
# ==================

def _bernoulli_seed(data_rng, dp_rng, n, epsilon):

    return data_rng.random(n), [sample_tulap(dp_rng.random(3), epsilon)]

def _bernoulli_generate(theta, data, dp):

    return np.count_nonzero(data <= theta[0], axis=1) + dp[:, 0]

def bernoulli_tulap(n, epsilon=1.0):
    '''s = sum I(u_i <= p) + N with N ~ Tulap(0, exp(-epsilon), 0). The
    mechanism part of a seed stores the Tulap draw itself.
    '''

    _require(int(n) >= 1, f'n must be positive, got {n}')
    _require(epsilon > 0, f'epsilon must be positive, got {epsilon}')
    n = int(n)

    spec = ModelSpec(
        name='bernoulli',
        param_box=ParamBox([0.0], [1.0], ('p',), interest_index=0),
        data_dims=n, dp_dims=1, summary_dim=1,
        generator=_bernoulli_generate,
        sample_seed=partial(_bernoulli_seed, n=n, epsilon=epsilon),
        default_statistic=depth.depth_statistic('mahalanobis', 1),
        privacy_label=f'{epsilon:g}-DP',
        params={'n': n, 'epsilon': epsilon},
        estimator=lambda s: np.clip([s[0] / n], 0.0, 1.0))

    return spec

# ================
# CLAMPED POISSON
# ================

def poisson_quantile(u, mean, upto=None):
    '''Poisson quantile by cumulative pmf summation, capped at
    mean + 20 sqrt(mean) (at least 20). With `upto=c` the result is
    clamped at c and the table stops there.
    '''

    u = np.asarray(u, dtype=float)
    cap = max(int(ceil(mean + 20 * sqrt(mean))), 20)
    top = cap if upto is None else min(cap, int(upto))

    if top <= 0:
        return np.zeros_like(u)

    cdf = np.cumsum(stats.poisson.pmf(np.arange(top + (upto is None)), mean))
    k = np.searchsorted(cdf, u, side='left')

    if upto is None or top < upto:
        if np.any(k >= cdf.size):
            raise ReproNumericError(
                f'poisson quantile beyond the cap of {cap}', [mean])

    return k.astype(float)

def _poisson_generate(theta, data, dp, n, c, epsilon):

    x = np.minimum(poisson_quantile(data, theta[0], upto=c), c)
    return x.mean(axis=1) + c / (n * epsilon) * dp[:, 0]

def poisson_clamped(n, c, epsilon=1.0, theta_max=100.0):
    '''s = mean of [x_i]_0^c + (c/(n epsilon)) N with Gaussian N.

    The rate space is (0, inf); `theta_max` bounds the window where
    interval searches start.
    '''

    _require(int(n) >= 1, f'n must be positive, got {n}')
    _require(c >= 0 and float(c).is_integer(),
            f'c must be a nonnegative integer, got {c}')
    _require(epsilon > 0, f'epsilon must be positive, got {epsilon}')
    n, c = int(n), int(c)

    if c == 0:
        logger.warning('poisson model with c=0 releases pure noise; '
                'theta is not identifiable')

    return ModelSpec(
        name='poisson',
        param_box=ParamBox([1e-8], [np.inf], ('theta',), interest_index=0,
            search_upper=[theta_max]),
        data_dims=n, dp_dims=1, summary_dim=1,
        generator=partial(_poisson_generate, n=n, c=c, epsilon=epsilon),
        sample_seed=partial(_uniform_seed, n=n, dp_kind=GAUSSIAN, dp_dims=1),
        default_statistic=depth.scalar_statistic(depth.TWO_SIDED),
        privacy_label=f'{epsilon:g}-GDP',
        params={'n': n, 'c': c, 'epsilon': epsilon},
        estimator=lambda s: np.clip(s[:1], 1e-8, theta_max))

# ===============================
# NORMAL LOCATION-SCALE
# ===============================

def _normal_generate(theta, data, dp, n, L, U, epsilon, noise):

    mu, sigma = theta
    x = np.clip(sigma * data + mu, L, U)
    mean = x.mean(axis=1)
    var = x.var(axis=1, ddof=1) if n > 1 else np.zeros_like(mean)

    # Laplace(0, 1/2) noise for the Laplace flavor
    factor = 0.5 if noise == LAPLACE else 1.0
    width = U - L
    s1 = additive_mechanism(mean, factor * width / (n * epsilon), noise, dp[:, 0])
    s2 = additive_mechanism(var, factor * width**2 / (n * epsilon), noise, dp[:, 1])

    return np.column_stack([s1, s2])

def _normal_estimator(s):

    return np.array([s[0], sqrt(max(s[1], 0.0))])

def normal_locscale(n, L=0.0, U=3.0, epsilon=1.0, noise=GAUSSIAN):
    '''Clamped sample mean and variance of N(mu, sigma^2) data, each with
    additive noise.
    '''

    _require(int(n) >= 1, f'n must be positive, got {n}')
    _require(L < U, f'clamping bounds need L < U, got [{L}, {U}]')
    _require(epsilon > 0, f'epsilon must be positive, got {epsilon}')
    _require(noise in (GAUSSIAN, LAPLACE), f'unknown noise {noise!r}')
    n = int(n)

    if noise == GAUSSIAN:
        label = f'{sqrt(2) * epsilon:g}-GDP'
    else:
        label = f'{2 * epsilon:g}-DP'

    return ModelSpec(
        name='normal',
        param_box=ParamBox([-10.0, 1e-8], [10.0, 10.0], ('mu', 'sigma'),
            interest_index=0),
        data_dims=n, dp_dims=2, summary_dim=2,
        generator=partial(_normal_generate, n=n, L=L, U=U, epsilon=epsilon,
            noise=noise),
        sample_seed=lambda data_rng, dp_rng: (
            data_rng.standard_normal(n),
            dp_rng.random(2) if noise == LAPLACE else dp_rng.standard_normal(2)),
        default_statistic=depth.depth_statistic('mahalanobis', 2),
        privacy_label=label,
        params={'n': n, 'L': L, 'U': U, 'epsilon': epsilon, 'noise': noise},
        estimator=_normal_estimator)

# ============================
# LINEAR REGRESSION (SSP)
# ============================

def _linreg_generate(theta, data, dp, n, delta, mu_gdp):

    beta1, beta0, ex, varx, vareps = theta
    x = ex + np.sqrt(varx) * data[:, :n]
    y = beta0 + beta1 * x + np.sqrt(vareps) * data[:, n:]

    mu = mu_gdp / sqrt(5)
    d, d2 = delta, delta**2

    releases = [
        (np.clip(x, -d, d), 2 * d),
        (np.clip(x**2, 0, d2), d2),
        (np.clip(y, -d, d), 2 * d),
        (np.clip(x * y, -d2, d2), 2 * d2),
        (np.clip(y**2, 0, d2), d2),
    ]

    return np.column_stack([
        additive_mechanism(v.mean(axis=1), scale / (mu * n), GAUSSIAN, dp[:, j])
        for j, (v, scale) in enumerate(releases)
    ])

def linreg_ssp(n, delta, mu_gdp):
    '''Five clamped sufficient statistics of simple linear regression,
    each released with the Gaussian mechanism at mu/sqrt(5).
    θ = (beta1, beta0, E[X], Var(X), Var(eps)).
    '''

    _require(int(n) >= 1, f'n must be positive, got {n}')
    _require(delta > 0, f'delta must be positive, got {delta}')
    _require(mu_gdp > 0, f'mu must be positive, got {mu_gdp}')
    n = int(n)

    return ModelSpec(
        name='linreg',
        param_box=ParamBox(
            [-10.0, -10.0, -10.0, 1e-6, 1e-6],
            [10.0, 10.0, 10.0, 10.0, 10.0],
            ('beta1', 'beta0', 'ex', 'varx', 'vareps'),
            interest_index=0),
        data_dims=2 * n, dp_dims=5, summary_dim=5,
        generator=partial(_linreg_generate, n=n, delta=delta, mu_gdp=mu_gdp),
        sample_seed=lambda data_rng, dp_rng: (
            data_rng.standard_normal(2 * n), dp_rng.standard_normal(5)),
        default_statistic=depth.depth_statistic('mahalanobis', 5),
        privacy_label=f'{mu_gdp:g}-GDP',
        params={'n': n, 'delta': delta, 'mu_gdp': mu_gdp,
            'release_mus': [mu_gdp / sqrt(5)] * 5})

# =======================================
# LOGISTIC REGRESSION, OBJECTIVE PERTURBED
# =======================================

def logistic_loss_grad_hess(theta, data):
    '''Average logistic loss with intercept; batched over the leading
    axis of theta (B, 2) and of x, y (B, n).
    '''

    x, y = data
    eta = theta[:, 0:1] + theta[:, 1:2] * x
    p = expit(eta)
    r, w = p - y, p * (1 - p)

    loss = np.mean(np.logaddexp(0, eta) - y * eta, axis=1)
    grad = np.column_stack([r.mean(axis=1), (r * x).mean(axis=1)])

    wx = (w * x).mean(axis=1)
    hess = np.empty((theta.shape[0], 2, 2))
    hess[:, 0, 0] = w.mean(axis=1)
    hess[:, 0, 1] = hess[:, 1, 0] = wx
    hess[:, 1, 1] = (w * x * x).mean(axis=1)

    return loss, grad, hess

def _logistic_seed(data_rng, dp_rng, n):

    v = sample_linf_density(1.0, 2, dp_rng.random(3))
    nk = sample_knorm_noise(1.0, 1.0, hull_ball(), dp_rng)
    return data_rng.random(2 * n), np.concatenate([v, nk])

def _logistic_generate(theta, data, dp, n, cfg, eps_k):

    beta0, beta1, a, b = theta
    z = betaincinv(a, b, data[:, :n])
    x = 2 * z - 1
    y = (data[:, n:] <= expit(beta0 + beta1 * x)).astype(float)

    V = dp[:, :2] / cfg.noise_rate
    beta = objective_perturbation((x, y), logistic_loss_grad_hess, cfg, None, V)

    # K-norm release of (sum z, sum z^2); the hull has sensitivity 1
    t = np.column_stack([z.sum(axis=1), (z**2).sum(axis=1)]) + dp[:, 2:] / eps_k

    return np.column_stack([beta, t])

def logistic_objpert(n, epsilon, budget_split=0.9, q=0.85, lam=0.25,
        delta_inf=2.0):
    '''Objective-perturbed logistic regression on x = 2z - 1 with
    z ~ Beta(a, b), plus a K-norm release of the first two moments of z.
    θ = (beta0, beta1, a, b); the seed stores the unit-rate perturbation
    and K-norm draws.
    '''

    _require(int(n) >= 1, f'n must be positive, got {n}')
    _require(epsilon > 0, f'epsilon must be positive, got {epsilon}')
    _require(0 < budget_split < 1,
            f'budget split must lie in (0, 1), got {budget_split}')
    n = int(n)

    cfg = ObjPertConfig(budget_split * epsilon, q, lam, delta_inf, 2)
    eps_k = (1 - budget_split) * epsilon

    return ModelSpec(
        name='logistic',
        param_box=ParamBox([-10.0, -10.0, 0.1, 0.1], [10.0, 10.0, 10.0, 10.0],
            ('beta0', 'beta1', 'a', 'b'), interest_index=1),
        data_dims=2 * n, dp_dims=4, summary_dim=4,
        generator=partial(_logistic_generate, n=n, cfg=cfg, eps_k=eps_k),
        sample_seed=partial(_logistic_seed, n=n),
        default_statistic=depth.depth_statistic('mahalanobis', 4),
        privacy_label=f'{epsilon:g}-DP',
        params={'n': n, 'epsilon': epsilon, 'budget_split': budget_split,
            'q': q, 'lam': lam, 'delta_inf': delta_inf})

# ====================
# CLAMPED EXPONENTIAL
# ====================

def _exponential_generate(theta, data, dp, n, c, epsilon):

    x = np.clip(-theta[0] * np.log1p(-data), 0.0, c)
    return additive_mechanism(x.mean(axis=1), c / (n * epsilon), LAPLACE, dp[:, 0])

def exponential_clamped(n, c, epsilon=1.0, mu_max=100.0):
    '''s = mean of [x_i]_0^c + (c/(n epsilon)) N with x_i ~ Exp(mean mu)
    and Laplace N.
    '''

    _require(int(n) >= 1, f'n must be positive, got {n}')
    _require(c > 0, f'c must be positive, got {c}')
    _require(epsilon > 0, f'epsilon must be positive, got {epsilon}')
    n = int(n)

    return ModelSpec(
        name='exponential',
        param_box=ParamBox([1e-8], [np.inf], ('mu',), interest_index=0,
            search_upper=[mu_max]),
        data_dims=n, dp_dims=1, summary_dim=1,
        generator=partial(_exponential_generate, n=n, c=c, epsilon=epsilon),
        sample_seed=partial(_uniform_seed, n=n, dp_kind=LAPLACE, dp_dims=1),
        default_statistic=depth.depth_statistic('mahalanobis', 1),
        privacy_label=f'{epsilon:g}-DP',
        params={'n': n, 'c': c, 'epsilon': epsilon},
        estimator=lambda s: np.clip(s[:1], 1e-8, mu_max))

# ===========================
# BERNOULLI WITH UNKNOWN N
# ===========================

def _binomial_quantile(u, n, p):
    '''Smallest k with cdf(k) >= u, looked up in the cdf table of
    Binom(n, p).
    '''

    if p <= 0: return np.zeros_like(u)
    if p >= 1: return np.full_like(u, float(n))

    cdf = stats.binom.cdf(np.arange(int(n) + 1), int(n), p)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side='left').astype(float)

def _unknown_n_generate(theta, data, dp, epsilon):

    p, n = theta
    x = _binomial_quantile(data[:, 0], n, p)
    return np.column_stack([x + dp[:, 0] / epsilon, n - x + dp[:, 1] / epsilon])

def unknown_n_pivot(epsilon):
    '''Approximate pivot for p with n estimated by max(s1 + s2, 1).
    '''

    def pivot(theta, P):
        p = theta[0]
        s1 = P[:, 0]
        nhat = np.maximum(P[:, 0] + P[:, 1], 1.0)
        var = nhat * p * (1 - p) + (p**2 + (1 - p)**2) / epsilon**2
        return (s1 - nhat * p) / np.sqrt(var)

    return pivot

def _unknown_n_search(s_obs, alpha, box, epsilon, level):

    total = s_obs[0] + s_obs[1]
    half = ndtri(1 - level / 2) * sqrt(2) / epsilon
    lo = max(1, floor(total - half))
    hi = max(lo, ceil(total + half))
    hi = min(hi, int(box.upper[1]))
    lo = min(lo, hi)

    adjusted = alpha - level
    _require(adjusted > 0,
            f'alpha={alpha} leaves nothing after the preliminary level {level}')

    logger.info('preliminary n interval [%d, %d], alpha adjusted to %g',
            lo, hi, adjusted)

    return box.restrict(1, float(lo), float(hi)), adjusted

def bernoulli_unknown_n(epsilon=1.0, n_max=10**6, prelim_level=1e-4):
    '''s = (X + N1, n - X + N2) with X ~ Binom(n, p), Gaussian noise of
    scale 1/epsilon. n is an integer nuisance searched over a preliminary
    interval of coverage 1 - prelim_level.
    '''

    _require(epsilon > 0, f'epsilon must be positive, got {epsilon}')

    box = ParamBox([0.0, 1.0], [1.0, float(n_max)], ('p', 'n'),
            interest_index=0, integer=(False, True))

    return ModelSpec(
        name='bernoulli-unknown-n',
        param_box=box,
        data_dims=1, dp_dims=2, summary_dim=2,
        generator=partial(_unknown_n_generate, epsilon=epsilon),
        sample_seed=lambda data_rng, dp_rng: (
            data_rng.random(1), dp_rng.standard_normal(2)),
        default_statistic=depth.depth_statistic('mahalanobis', 2),
        privacy_label=f'{sqrt(2) * epsilon:g}-GDP',
        params={'epsilon': epsilon, 'prelim_level': prelim_level},
        statistics={'pivot': depth.pivot_statistic(
            unknown_n_pivot(epsilon), depth.TWO_SIDED, 'unknown-n pivot')},
        search=partial(_unknown_n_search, box=box, epsilon=epsilon,
            level=prelim_level))

# ============================
# DIFFERENTIALLY PRIVATE MANN-WHITNEY
# ============================

def mann_whitney_u(values, m):
    '''min(U1, m(n-m) - U1) where U1 is the rank sum of the first m
    columns minus m(m+1)/2; batched over rows.
    '''

    n = values.shape[1]
    ranks = stats.rankdata(values, axis=1)
    u1 = ranks[:, :m].sum(axis=1) - m * (m + 1) / 2

    return np.minimum(u1, m * (n - m) - u1)

def _mann_whitney_release(values, m, dp, eps_m, eps_u, kind):

    n = values.shape[1]
    noise = _noise(dp, kind)
    return np.column_stack([
        m + noise[:, 0] / eps_m,
        mann_whitney_u(values, m) + n * noise[:, 1] / eps_u,
    ])

def _mann_whitney_generate(theta, data, dp, eps_m, eps_u, kind):

    return _mann_whitney_release(data, int(theta[0]), dp, eps_m, eps_u, kind)

def _mann_whitney_observe(theta, data_rng, dp_rng, n, eps_m, eps_u, kind,
        alternative):

    m = int(theta[0])
    values = np.concatenate([
        data_rng.random(m), data_rng.beta(*alternative, size=n - m)])
    dp = dp_rng.random(2) if kind == LAPLACE else dp_rng.standard_normal(2)

    return _mann_whitney_release(values[None, :], m, dp[None, :],
            eps_m, eps_u, kind)[0]

def mann_whitney_pivot(n, eps_m, eps_u):
    '''Standardized private U statistic; does not depend on θ.
    '''

    def pivot(theta, P):
        m_tilde, u_tilde = P[:, 0], P[:, 1]
        m_hat = np.minimum(np.maximum(m_tilde, 1.0), n // 2)
        num = u_tilde - (n - m_tilde) * m_tilde / 2 - 1 / eps_m**2
        var = m_hat * (n - m_hat) * (n + 1) / 12 + 2 * n**2 / eps_u**2 \
            + (n - 2 * m_hat)**2 / (2 * eps_m**2) + 1 / (2 * eps_m**4)
        return num / np.sqrt(var)

    return pivot

def mann_whitney(n, eps_m, eps_u, flavor=PURE_DP_LAPLACE, alternative=None):
    '''Private group size m and Mann-Whitney U. Under the null every
    observation is Unif(0, 1), so U depends on m only. `alternative`
    gives Beta shape parameters for the second group of observed data.
    '''

    _require(int(n) >= 2, f'n must be at least 2, got {n}')
    _require(eps_m > 0 and eps_u > 0,
            f'privacy split must be positive, got eps_m={eps_m}, eps_u={eps_u}')
    _require(flavor in (PURE_DP_LAPLACE, GDP_GAUSSIAN), f'unknown flavor {flavor!r}')
    n = int(n)

    kind = LAPLACE if flavor == PURE_DP_LAPLACE else GAUSSIAN
    if flavor == PURE_DP_LAPLACE:
        label = f'{eps_m + eps_u:g}-DP'
    else:
        label = f'{sqrt(eps_m**2 + eps_u**2):g}-GDP'

    observer = None
    if alternative is not None:
        _require(len(alternative) == 2 and min(alternative) > 0,
                f'alternative needs two positive Beta shapes, got {alternative}')
        observer = partial(_mann_whitney_observe, n=n, eps_m=eps_m,
                eps_u=eps_u, kind=kind, alternative=tuple(alternative))

    pivot = depth.pivot_statistic(mann_whitney_pivot(n, eps_m, eps_u),
            depth.TWO_SIDED, 'mann-whitney pivot')

    return ModelSpec(
        name='mann-whitney',
        param_box=ParamBox([1.0], [float(n // 2)], ('m',), interest_index=0,
            integer=(True,)),
        data_dims=n, dp_dims=2, summary_dim=2,
        generator=partial(_mann_whitney_generate, eps_m=eps_m, eps_u=eps_u,
            kind=kind),
        sample_seed=partial(_uniform_seed, n=n, dp_kind=kind, dp_dims=2),
        default_statistic=pivot,
        privacy_label=label,
        params={'n': n, 'eps_m': eps_m, 'eps_u': eps_u, 'flavor': flavor,
            'alternative': alternative},
        statistics={'pivot': pivot},
        observer=observer)

# ========
# REGISTRY
# ========

MODELS = {
    'bernoulli': bernoulli_tulap,
    'poisson': poisson_clamped,
    'normal': normal_locscale,
    'linreg': linreg_ssp,
    'logistic': logistic_objpert,
    'exponential': exponential_clamped,
    'bernoulli-unknown-n': bernoulli_unknown_n,
    'mann-whitney': mann_whitney,
}

def build_model(name, params=None):
    '''Construct a registered model from keyword parameters.
    '''

    if name not in MODELS:
        raise InvalidArgumentError(
            f'unknown model {name!r}; registered: {", ".join(MODELS)}')

    try:
        return MODELS[name](**(params or {}))
    except TypeError as e:
        raise InvalidArgumentError(f'bad parameters for model {name!r}: {e}')
