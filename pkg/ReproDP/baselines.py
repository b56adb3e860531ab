#!/usr/bin/env python3
'''Comparison methods: characteristic-function inversion for the clamped
exponential mean and the parametric bootstrap (percentile and
simplified-t).
'''

import logging
import warnings
from dataclasses import dataclass
from math import ceil, pi
from typing import Callable
import numpy as np
from scipy import integrate, optimize
from ReproDP.engine import (BOOTSTRAP_STREAM, draw_seed_bank, generate_bank,
        as_summary)
from ReproDP.errors import InvalidArgumentError, ReproNumericError, BracketError
from ReproDP.inference import ConfidenceInterval

logger = logging.getLogger(__name__)

PERCENTILE = 'percentile'
SIMPLIFIED_T = 'simplified_t'

ENVELOPE_CUTOFF = 1e-10
TAIL_TOL = 1e-7
QUAD_EPSABS = 1e-7
NO_ENVELOPE_STOP = 1e6
MAX_PANELS = 10**6
PANEL_CHUNK = 20000

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)

# ========================
# CHARACTERISTIC FUNCTIONS
# ========================

@dataclass(frozen=True)
class CharFn:
    '''`support` bounds |X| and sets the panel width of the inversion
    integral; `envelope(t)` bounds |φ(t)| from above when known.
    '''

    evaluator: Callable
    label: str = ''
    support: float = 0.0
    envelope: Callable = None

    def __call__(self, t):

        out = self.evaluator(np.asarray(t, dtype=float))
        return complex(out) if np.ndim(out) == 0 else out

def _clamped_exponential(t, mu, c):

    z = c * (1j * t - 1 / mu)
    return -np.expm1(z) / (1 - 1j * t * mu) + np.exp(z)

def cf_clamped_exponential(mu, c):
    '''cf of min(X, c) for X exponential with mean mu.
    '''

    if not (mu > 0 and c > 0):
        raise InvalidArgumentError(f'need mu > 0 and c > 0, got mu={mu}, c={c}')

    return CharFn(lambda t: _clamped_exponential(t, mu, c),
            f'clamped-exponential(mu={mu:g}, c={c:g})', support=c)

def laplace_cf(scale=1.0):

    envelope = lambda t: 1 / (1 + (scale * t)**2)
    return CharFn(envelope, f'laplace({scale:g})', 0.0, envelope)

def cf_clamped_exponential_mean(mu, c, n, epsilon):
    '''cf of s = mean of n clamped exponential draws + (c/(n epsilon)) N
    with standard Laplace N: φ(t/n)^n / (1 + (ct/(n epsilon))^2).
    '''

    if int(n) < 1 or not epsilon > 0:
        raise InvalidArgumentError(f'need n >= 1 and epsilon > 0, got {n}, {epsilon}')

    n = int(n)
    data = cf_clamped_exponential(mu, c)
    noise = laplace_cf(c / (n * epsilon))

    return CharFn(lambda t: data.evaluator(t / n)**n * noise.evaluator(t),
            f'mean of {n} {data.label} + {noise.label}', c, noise.envelope)

# ===================
# GIL-PELAEZ INVERSION
# ===================

def _truncation(cf, start=1.0):
    '''Point past which the tail of the inversion integral is negligible:
    the envelope bound on the remaining integral drops below TAIL_TOL, or
    |φ| stays below ENVELOPE_CUTOFF on a log grid.
    '''

    stop = NO_ENVELOPE_STOP
    if cf.envelope is not None:
        grid = np.geomspace(start, 1e12, 4000)
        pieces = np.diff(np.log(grid)) * 0.5 * (
            cf.envelope(grid[1:]) + cf.envelope(grid[:-1]))
        tail = np.append(np.cumsum(pieces[::-1])[::-1], 0.0)
        stop = grid[np.argmax(tail < TAIL_TOL)]

    grid = np.geomspace(start, max(stop, start * (1 + 1e-9)), 2000)
    above = np.flatnonzero(np.abs(cf(grid)) >= ENVELOPE_CUTOFF)
    if above.size == 0:
        return start

    return grid[min(above[-1] + 1, grid.size - 1)]

def _imaginary_part(cf, x):
    return lambda t: (np.exp(-1j * t * x) * cf(t)).imag

def _panels(f, start, stop, period):
    '''∫ f over [start, stop] with Gauss-Legendre rules on panels of one
    oscillation period, evaluated in chunks.
    '''

    count = max(ceil((stop - start) / period), 1)
    if count > MAX_PANELS:
        raise ReproNumericError(f'inversion integral needs {count} panels')

    edges = np.minimum(start + period * np.arange(count + 1), stop)
    total = 0.0
    for i in range(0, count, PANEL_CHUNK):
        j = min(i + PANEL_CHUNK, count)
        a, b = edges[i:j], edges[i + 1:j + 1]
        half = 0.5 * (b - a)
        t = (0.5 * (a + b))[:, None] + half[:, None] * _GL_NODES
        total += float(np.sum((f(t) @ _GL_WEIGHTS) * half))

    return total

def gil_pelaez_cdf(x, cf):
    '''F(x) = 1/2 - (1/pi) ∫_0^∞ Im(e^{-itx} φ(t))/t dt.

    [0, 1] is integrated adaptively; the tail up to the truncation point
    uses fixed Gauss-Legendre panels one period of the fastest
    oscillation wide.
    '''

    im = _imaginary_part(cf, x)
    omega = max(abs(x) + cf.support, 1.0)
    stop = _truncation(cf)

    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            head, _ = integrate.quad(lambda t: im(t) / t, 0.0, 1.0,
                    epsabs=QUAD_EPSABS, limit=200)
        except integrate.IntegrationWarning as e:
            raise ReproNumericError(
                f'quadrature did not converge at x={x:g} for {cf.label}: {e}')

    try:
        tail = _panels(lambda t: im(t) / t, 1.0, stop, 2 * pi / omega) \
            if stop > 1.0 else 0.0
    except ReproNumericError as e:
        raise ReproNumericError(f'{e} at x={x:g} for {cf.label}')

    total = head + tail
    if not np.isfinite(total):
        raise ReproNumericError(f'inversion integral is not finite at x={x:g} for {cf.label}')

    return float(np.clip(0.5 - total / pi, 0.0, 1.0))


def inversion_ci(s_obs, alpha, n, c, epsilon, mu_bracket=(0.1, 1000.0)):
    '''Exact interval for the exponential mean from the clamped, Laplace
    privatized sample mean: mu with F_mu(s_obs) in [alpha/2, 1 - alpha/2].
    F_mu(s) decreases in mu, so both limits are found by bisection.
    '''

    if not 0 < alpha < 1:
        raise InvalidArgumentError(f'alpha must lie in (0, 1), got {alpha}')

    s = float(as_summary(np.atleast_1d(s_obs)).values[0])
    lo, hi = map(float, mu_bracket)

    def cdf(mu):
        return gil_pelaez_cdf(s, cf_clamped_exponential_mean(mu, c, n, epsilon))

    f_lo, f_hi = cdf(lo), cdf(hi)

    def solve(level):

        if not (f_lo - level) * (f_hi - level) < 0:
            raise BracketError(
                f'F(s_obs) - {level:g} has no sign change on [{lo:g}, {hi:g}] '
                f'(F={f_lo:.4g}, {f_hi:.4g})')
        return optimize.bisect(lambda mu: cdf(mu) - level, lo, hi, rtol=1e-6)

    lower, upper = solve(1 - alpha / 2), solve(alpha / 2)
    logger.info('inversion interval [%g, %g] for s=%g', lower, upper, s)

    return ConfidenceInterval(lower, upper, False, alpha, 0, 1e-6, 0, 'mu')

# ===================
# PARAMETRIC BOOTSTRAP
# ===================

def _estimate(estimator, s):

    theta = np.asarray(estimator(s), dtype=float).reshape(-1)
    if not np.all(np.isfinite(theta)):
        raise ReproNumericError(f'estimator is not finite at s={np.asarray(s).tolist()}')
    return theta

def parametric_bootstrap_ci(model, estimator, s_obs, B, alpha,
        method=PERCENTILE, master_seed=0):
    '''Per-coordinate intervals from B releases simulated at θ̂ =
    estimator(s_obs), projected onto the parameter box.

    `percentile` reports quantiles of θ̂_b; `simplified_t` reports the
    same quantiles of 2θ̂ - θ̂_b.
    '''

    if int(B) < 2:
        raise InvalidArgumentError(f'B must be at least 2, got {B}')
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f'alpha must lie in (0, 1), got {alpha}')
    if method not in (PERCENTILE, SIMPLIFIED_T):
        raise InvalidArgumentError(f'unknown bootstrap method {method!r}')

    estimator = estimator or model.estimator
    if estimator is None:
        raise InvalidArgumentError(f'model {model.name} has no estimator')

    box = model.param_box
    theta_hat = box.project(_estimate(estimator, as_summary(s_obs).values))

    bank = draw_seed_bank(model, B, master_seed, BOOTSTRAP_STREAM)
    repro = generate_bank(model, theta_hat, bank)
    draws = np.array([_estimate(estimator, s) for s in repro])

    q_lo, q_hi = np.quantile(draws, [alpha / 2, 1 - alpha / 2], axis=0)
    if method == SIMPLIFIED_T:
        q_lo, q_hi = 2 * theta_hat - q_hi, 2 * theta_hat - q_lo

    return tuple(
        ConfidenceInterval(float(lo), float(hi), False, alpha, int(B), 0.0,
            int(master_seed), name)
        for lo, hi, name in zip(q_lo, q_hi, box.names))
