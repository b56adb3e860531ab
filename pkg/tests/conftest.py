import numpy as np
import pytest
from scipy.special import ndtr
from ReproDP import depth
from ReproDP.engine import ParamBox, SeedBank, draw_seed_bank
from ReproDP.models import ModelSpec

def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
        help='run Monte Carlo studies marked slow')

def pytest_collection_modifyitems(config, items):

    if config.getoption('--runslow'):
        return

    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)

def location_model(dim=1, lower=-10.0, upper=10.0, noise=0.5):
    '''s = θ + z + noise * z' with standard normal seeds.'''

    names = ('mu',) if dim == 1 else tuple(f'mu{i}' for i in range(dim))

    return ModelSpec(
        name='location',
        param_box=ParamBox([lower] * dim, [upper] * dim, names,
            interest_index=0),
        data_dims=dim, dp_dims=dim, summary_dim=dim,
        generator=lambda theta, data, dp: theta + data + noise * dp,
        sample_seed=lambda data_rng, dp_rng: (
            data_rng.standard_normal(dim), dp_rng.standard_normal(dim)),
        default_statistic=depth.depth_statistic('mahalanobis', dim),
        privacy_label='test',
        estimator=lambda s: np.asarray(s, dtype=float))

def fixed_model(lower=0.0, upper=1.0):
    '''Releases the data seed itself whatever θ is.'''

    return ModelSpec(
        name='fixed',
        param_box=ParamBox([lower], [upper], ('theta',), interest_index=0),
        data_dims=1, dp_dims=1, summary_dim=1,
        generator=lambda theta, data, dp: data[:, :1],
        sample_seed=lambda data_rng, dp_rng: (data_rng.random(1), [0.0]),
        default_statistic=identity_statistic(),
        privacy_label='test')

def identity_statistic():
    '''Scores are the summary itself, values are Φ(score).'''

    return depth.TestStatistic('identity', depth.LOW_UNUSUAL,
        lambda theta, P: P[:, 0], ndtr, label='identity')

def manual_bank(values):

    values = np.asarray(values, dtype=float).reshape(-1, 1)
    return SeedBank(values, np.zeros_like(values), 0)

@pytest.fixture
def location():
    return location_model()

@pytest.fixture
def location_bank(location):
    return draw_seed_bank(location, 99, 1234)
