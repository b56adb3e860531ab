#!/usr/bin/env python3
'''Bodies of the ci, pvalue, grid and replicate commands. Each returns
`(header, rows, exit_status)`; writing is left to the caller.
'''

import logging
import math
from functools import partial
from multiprocessing.pool import Pool
import numpy as np
from ReproDP.baselines import (parametric_bootstrap_ci, inversion_ci,
        PERCENTILE, SIMPLIFIED_T)
from ReproDP.decorators import timed
from ReproDP.engine import draw_seed_bank, draw_observation, Summary
from ReproDP.errors import ConfigError, ReproError
from ReproDP.inference import (AcceptanceSearch, confidence_interval,
        confidence_grid, pvalue)
from ReproDP.misc import replicate_seed, config_digest
from ReproDP.output import (CI_HEADER, PVALUE_HEADER, REPLICATE_HEADER,
        grid_header, ci_row, pvalue_row, grid_rows, replicate_row)
from ReproDP.sql import (get_or_create_run, completed_replicates,
        store_replicate, get_records)
from ReproDP.validators import REPRO, BOOTSTRAP_PERCENTILE, BOOTSTRAP_T

logger = logging.getLogger(__name__)

FAILURE_LIMIT = 0.01
EXIT_FAILURES = 4

# =======
# HELPERS
# =======

def observed_release(config, model, seed):
    '''The configured s_obs, or a release drawn at true_theta.
    '''

    if config.s_obs is not None:
        return Summary(config.s_obs)
    if config.true_theta is None:
        raise ConfigError('config needs either s_obs or true_theta')

    return draw_observation(model, config.true_theta, seed)

def report_coords(config, model):

    box = model.param_box
    if config.coords: return list(config.coords)
    return [box.names[box.interest_index or 0]]

def _repro_setup(config, model, s_obs, seed):

    statistic = config.statistic_for(model)
    bank = draw_seed_bank(model, config.R, seed)
    region, alpha = model.search_region(s_obs.values, config.alpha)

    return statistic, bank, region, alpha

def interval_study(config, model, s_obs, seed):
    '''Intervals for the reported coordinates with the configured method.
    '''

    coords = report_coords(config, model)

    if config.method == REPRO:

        statistic, bank, region, alpha = _repro_setup(config, model, s_obs, seed)
        search = AcceptanceSearch(model, statistic, s_obs, bank, alpha,
                config.optimizer_spec())

        return [confidence_interval(alpha, region, bank, model, statistic,
                    s_obs, config.tol, coord=name, search=search)
                for name in coords]

    if config.method in (BOOTSTRAP_PERCENTILE, BOOTSTRAP_T):

        method = PERCENTILE if config.method == BOOTSTRAP_PERCENTILE \
            else SIMPLIFIED_T
        cis = parametric_bootstrap_ci(model, None, s_obs, config.B,
                config.alpha, method, seed)
        return [ci for ci in cis if ci.coord in coords]

    p = model.params
    return [inversion_ci(s_obs.values, config.alpha, p['n'], p['c'],
        p['epsilon'])]

def null_test(config, model, s_obs, seed):

    statistic, bank, region, _ = _repro_setup(config, model, s_obs, seed)
    if config.null is not None:
        region = region.fix(config.null['fix'])

    return pvalue(region, bank, model, statistic, s_obs,
            config.optimizer_spec(), config.significance)

def _runtime(config, ms):
    return ms if config.record_runtime else 0

# ========
# COMMANDS
# ========

def cmd_ci(config, jobs=1):
    '''One row per reported coordinate, repeated for every sweep value.
    '''

    rows = []

    for label, variant in config.sweep_variants():

        model = variant.build_model()
        s_obs = observed_release(variant, model, variant.master_seed)
        cis, ms = timed(interval_study)(variant, model, s_obs,
                variant.master_seed)

        logger.info('%s: %d interval(s) in %d ms', label, len(cis), ms)
        rows += [ci_row(label, variant.method, ci, variant.master_seed,
            _runtime(variant, ms)) for ci in cis]

    return CI_HEADER, rows, 0

def cmd_pvalue(config, jobs=1):

    if config.method != REPRO:
        raise ConfigError('p-values are computed with the repro method only')

    model = config.build_model()
    s_obs = observed_release(config, model, config.master_seed)
    result, ms = timed(null_test)(config, model, s_obs, config.master_seed)

    return PVALUE_HEADER, [pvalue_row(model.name, result, config.master_seed,
        _runtime(config, ms))], 0

def cmd_grid(config, jobs=1):

    if config.method != REPRO:
        raise ConfigError('grids are computed with the repro method only')

    model = config.build_model()
    s_obs = observed_release(config, model, config.master_seed)
    statistic, bank, region, alpha = _repro_setup(config, model, s_obs,
            config.master_seed)

    grid = confidence_grid(alpha, region, bank, model, statistic, s_obs,
            config.resolution, config.optimizer_spec(), config.tol)

    return grid_header(model.dim), grid_rows(grid), 0

# =========
# REPLICATE
# =========

def _record(index, seed, coord, metric, value, status='ok', runtime_ms=0):

    return dict(replicate=index, seed=seed, coord=coord, metric=metric,
            value=float(value), status=status, runtime_ms=runtime_ms)

def _replicate_metrics(config, model, index, seed):

    s_obs = draw_observation(model, config.true_theta, seed)

    if config.null is not None:
        result = null_test(config, model, s_obs, seed)
        level = config.significance or config.alpha
        return [_record(index, seed, '', 'p', result.p),
                _record(index, seed, '', 'reject', result.p <= level)]

    records = []
    for ci in interval_study(config, model, s_obs, seed):

        truth = config.true_theta[model.param_box.index_of(ci.coord)]
        records += [
            _record(index, seed, ci.coord, 'lower', ci.lower),
            _record(index, seed, ci.coord, 'upper', ci.upper),
            _record(index, seed, ci.coord, 'width',
                math.nan if ci.empty else ci.width),
            _record(index, seed, ci.coord, 'covered', ci.contains(truth)),
            _record(index, seed, ci.coord, 'empty', ci.empty),
        ]

    return records

def run_replicate(config, index):
    '''Metric records of replicate `index`, seeded with master_seed XOR
    index. Errors are recorded, not raised.
    '''

    seed = replicate_seed(config.master_seed, index)
    model = config.build_model()

    try:
        records, ms = timed(_replicate_metrics)(config, model, index, seed)
    except ReproError as e:
        logger.warning('replicate %d (seed %d) failed: %s', index, seed, e)
        return [_record(index, seed, '', 'failure', math.nan,
            f'failed:{e.kind}')]

    for rec in records:
        rec['runtime_ms'] = _runtime(config, ms)

    logger.info('replicate %d finished in %d ms', index, ms)
    return records

def _mean_se(values):

    values = np.asarray(values, dtype=float)
    k = values.size
    if k == 0: return math.nan, None

    mean = float(values.mean())
    if not np.isfinite(mean) or k < 2: return mean, None
    return mean, float(values.std(ddof=1) / math.sqrt(k))

def _proportion(values):

    values = np.asarray(values, dtype=float)
    if values.size == 0: return math.nan, None

    p = float(values.mean())
    return p, math.sqrt(p * (1 - p) / values.size)

def summary_rows(records, replicates):
    '''Coverage, width, empty and rejection rates over the successful
    replicates, with standard errors, plus the failure rate.
    '''

    metrics = {}
    for rec in records:
        metrics.setdefault((rec['coord'], rec['metric']), []).append(rec['value'])

    rows = []
    for (coord, metric), values in metrics.items():

        if metric == 'covered':
            rows.append(('coverage', coord) + _proportion(values))
        elif metric == 'width':
            finite = [v for v in values if not math.isnan(v)]
            rows.append(('width', coord) + _mean_se(finite))
        elif metric == 'empty':
            rows.append(('empty_rate', coord) + _proportion(values))
        elif metric == 'reject':
            rows.append(('rejection_rate', coord) + _proportion(values))

    failed = len({rec['replicate'] for rec in records
        if rec['status'] != 'ok'})
    rows.append(('failures', '', failed / replicates, None))

    return [replicate_row('summary', None, coord, metric, value, se)
        for metric, coord, value, se in rows]

def _replicate_study(config, jobs, db_session):
    '''Records of every replicate of one configuration, stored in and
    resumed from `db_session` when given.
    '''

    todo = list(range(config.replicates))
    run = None

    if db_session is not None:
        run = get_or_create_run(db_session, config_digest(config.raw),
                config.model, config.method, config.master_seed,
                config.replicates)
        done = completed_replicates(db_session, run)
        todo = [i for i in todo if i not in done]
        logger.info('%d replicate(s) stored, %d to run', len(done), len(todo))

    worker = partial(run_replicate, config)
    collected = []

    def collect(results):
        for records in results:
            if run is not None: store_replicate(db_session, run, records)
            else: collected.extend(records)

    if jobs > 1 and len(todo) > 1:
        with Pool(jobs) as pool:
            collect(pool.imap(worker, todo))
    else:
        collect(map(worker, todo))

    return get_records(db_session, run) if run is not None else collected

def cmd_replicate(config, jobs=1, db_session=None):
    '''Monte Carlo study over `replicates` observed releases drawn at
    true_theta, once per sweep value. Exits with status 4 when more than
    1% of the replicates of any study fail.
    '''

    if config.replicates < 2:
        raise ConfigError(f'replicate needs at least 2 replicates, got {config.replicates}')
    if config.true_theta is None:
        raise ConfigError('replicate needs true_theta')
    if jobs < 1:
        raise ConfigError(f'--jobs must be positive, got {jobs}')

    rows, status = [], 0

    for label, variant in config.sweep_variants():

        tag = str if config.sweep is None else (lambda x: f'{label}/{x}')
        records = _replicate_study(variant, jobs, db_session)

        rows += [replicate_row(tag(r['replicate']), r['seed'], r['coord'],
            r['metric'], r['value'], None, r['status'], r['runtime_ms'])
            for r in records]
        rows += [[tag(row[0])] + row[1:]
            for row in summary_rows(records, variant.replicates)]

        failed = len({r['replicate'] for r in records if r['status'] != 'ok'})
        if failed > FAILURE_LIMIT * variant.replicates:
            logger.warning('%s: %d of %d replicates failed', label, failed,
                    variant.replicates)
            status = EXIT_FAILURES

    return REPLICATE_HEADER, rows, status
