import json
from pathlib import Path
import pytest
from ReproDP import validators
from ReproDP.decorators import timed
from ReproDP.errors import ConfigError
from ReproDP.inference import OptimizerSpec

CONFIGS = sorted((Path(__file__).parent.parent / 'configs').glob('*.json'))

def parse(**raw):
    return validators.parse_config({
        'model': {'name': 'bernoulli', 'params': {'n': 30}}, **raw})

@pytest.mark.parametrize('path', CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_load(path):

    config = validators.load_config(str(path))
    assert config.output == path.stem + '.csv'
    assert config.raw == json.loads(path.read_text())
    assert len(config.sweep_variants()) == len((config.sweep or {}).get('values', [0]))

def test_defaults():

    config = parse()

    assert config.method == validators.REPRO
    assert config.statistic == 'default'
    assert config.alpha == 0.05
    assert config.R == 200
    assert config.record_runtime is True
    assert config.build_model().name == 'bernoulli'

def test_with_overrides():

    config = parse(master_seed=3, output='a.csv')

    assert config.with_overrides() is config

    changed = config.with_overrides(seed=11, out='b.csv')
    assert changed.master_seed == 11
    assert changed.output == 'b.csv'
    assert changed.raw['master_seed'] == 11
    assert config.raw['master_seed'] == 3

    with pytest.raises(ConfigError):
        config.with_overrides(seed=-1)

def test_build_model_overrides():

    config = validators.parse_config({
        'model': {'name': 'poisson', 'params': {'n': 10, 'c': 4}}})
    assert config.build_model(c=9).params['c'] == 9

def test_optimizer_spec():

    spec = parse(optimizer={'n_starts': 3, 'seed': 2}).optimizer_spec()
    assert (spec.n_starts, spec.seed) == (3, 2)

    paranoid = parse(optimizer={'paranoid': True}).optimizer_spec()
    assert paranoid == OptimizerSpec.paranoid()

@pytest.mark.parametrize('raw', [
    {},
    {'model': {'name': 'gamma'}},
    {'model': {'name': 'bernoulli', 'extra': 1}},
    {'model': {'name': 'bernoulli', 'params': {'n': 30, 'rho': 2}}},
])
def test_bad_model_entries(raw):

    with pytest.raises(ConfigError):
        validators.parse_config(raw)

@pytest.mark.parametrize('raw', [
    {'alpha': 0},
    {'alpha': True},
    {'significance': 1.0},
    {'R': 0},
    {'R': 2.5},
    {'B': 1},
    {'replicates': 0},
    {'master_seed': -4},
    {'resolution': 0},
    {'tol': 0},
    {'true_theta': [0.5, 0.5]},
    {'true_theta': [1.5]},
    {'true_theta': 'p'},
    {'s_obs': [True]},
    {'coords': ['q']},
    {'coords': 'p'},
    {'null': {'fix': {'q': 0.5}}},
    {'null': {'at': {}}},
    {'null': {'fix': {'p': 'x'}}},
    {'method': 'jackknife'},
    {'method': 'bootstrap_t', 'null': {'fix': {'p': 0.5}}},
    {'statistic': 'tukey'},
    {'statistic': 'pivot'},
    {'output': 3},
    {'optimizer': {'restarts': 2}},
    {'optimizer': {'n_starts': 0}},
    {'optimizer': {'method': 'newton'}},
    {'sweep': {'param': 'n'}},
    {'sweep': {'param': 'n', 'values': []}},
    {'record_runtime': 'no'},
])
def test_bad_entries(raw):

    with pytest.raises(ConfigError):
        parse(**raw)

def test_bootstrap_needs_estimator():

    with pytest.raises(ConfigError):
        validators.parse_config({
            'model': {'name': 'linreg',
                'params': {'n': 100, 'delta': 2.0, 'mu_gdp': 1.0}},
            'method': 'bootstrap_percentile'})

def test_load_config_errors(tmp_path):

    with pytest.raises(ConfigError):
        validators.load_config(str(tmp_path / 'missing.json'))

    with pytest.raises(ConfigError):
        validators.load_config(str(tmp_path))

    bad = tmp_path / 'bad.json'
    bad.write_text('{"model": [')
    with pytest.raises(ConfigError):
        validators.load_config(str(bad))

def test_timed():

    result, ms = timed(lambda x: x + 1)(1)
    assert result == 2
    assert isinstance(ms, int) and ms >= 0

def test_sweep_variants_without_sweep():

    config = parse()
    assert config.sweep_variants() == [('bernoulli', config)]

def test_sweep_variants_over_r_and_model_parameter():

    by_r = parse(sweep={'param': 'R', 'values': [19, 39]}).sweep_variants()
    assert [label for label, _ in by_r] == ['bernoulli[R=19]', 'bernoulli[R=39]']
    assert [v.R for _, v in by_r] == [19, 39]
    assert all(v.sweep is None for _, v in by_r)

    by_n = parse(sweep={'param': 'n', 'values': [10, 40]}).sweep_variants()
    assert [v.build_model().params['n'] for _, v in by_n] == [10, 40]

def test_sweep_variants_over_true_theta_coordinate():

    config = validators.parse_config({
        'model': {'name': 'linreg',
            'params': {'n': 100, 'delta': 2.0, 'mu_gdp': 1.0}},
        'true_theta': [0.0, -0.5, 0.5, 1.0, 0.25],
        'null': {'fix': {'beta1': 0.0}},
        'sweep': {'param': 'beta1', 'values': [0.1, 0.4]}})

    thetas = [v.true_theta for _, v in config.sweep_variants()]
    assert thetas == [[0.1, -0.5, 0.5, 1.0, 0.25], [0.4, -0.5, 0.5, 1.0, 0.25]]
    assert config.true_theta[0] == 0.0

@pytest.mark.parametrize('sweep', [
    {'param': 'rho', 'values': [1]},
    {'param': 'R', 'values': [2.5]},
])
def test_bad_sweeps(sweep):

    with pytest.raises(ConfigError):
        parse(sweep=sweep).sweep_variants()

def test_logistic_hessian_bound_from_config():

    path = Path(__file__).parent.parent / 'configs' / 'logistic_objpert_lam_half.json'
    model = validators.load_config(str(path)).build_model()

    assert model.params['lam'] == 0.5
