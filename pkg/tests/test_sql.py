import math
import pytest
from ReproDP import sql

def record(replicate, metric, value, status='ok', coord='p'):
    return dict(replicate=replicate, seed=replicate ^ 3, coord=coord,
            metric=metric, value=value, status=status, runtime_ms=5)

@pytest.fixture
def session(tmp_path):

    db = sql.create_db(tmp_path / 'runs.db')
    yield db
    db.close()

def test_get_or_create_run_is_idempotent(session):

    first = sql.get_or_create_run(session, 'abc', 'bernoulli', 'repro', 3, 10)
    second = sql.get_or_create_run(session, 'abc', 'bernoulli', 'repro', 3, 10)
    other = sql.get_or_create_run(session, 'def', 'bernoulli', 'repro', 3, 10)

    assert first.id == second.id
    assert other.id != first.id

def test_store_and_read_records(session):

    run = sql.get_or_create_run(session, 'abc', 'bernoulli', 'repro', 3, 10)

    sql.store_replicate(session, run, [record(1, 'lower', 0.1),
        record(1, 'upper', math.inf)])
    sql.store_replicate(session, run, [record(0, 'width', math.nan),
        record(0, 'covered', True)])

    records = sql.get_records(session, run)

    assert [(r['replicate'], r['metric']) for r in records] == [
        (0, 'width'), (0, 'covered'), (1, 'lower'), (1, 'upper')]
    assert math.isnan(records[0]['value'])
    assert records[1]['value'] == 1.0
    assert records[3]['value'] == math.inf
    assert records[2]['seed'] == 1 ^ 3
    assert sql.completed_replicates(session, run) == {0, 1}

def test_failure_rows(session):

    run = sql.get_or_create_run(session, 'abc', 'bernoulli', 'repro', 3, 10)
    sql.store_replicate(session, run, [record(4, 'failure', math.nan,
        'failed:numeric-error', coord='')])

    (rec,) = sql.get_records(session, run)
    assert rec['status'] == 'failed:numeric-error'
    assert rec['coord'] == ''

def test_runs_are_separate(session):

    a = sql.get_or_create_run(session, 'a', 'bernoulli', 'repro', 3, 10)
    b = sql.get_or_create_run(session, 'b', 'bernoulli', 'repro', 3, 10)
    sql.store_replicate(session, a, [record(0, 'lower', 0.1)])

    assert sql.completed_replicates(session, b) == set()
    assert sql.get_records(session, b) == []

def test_reopen_keeps_rows(tmp_path):

    path = tmp_path / 'runs.db'
    db = sql.create_db(path)
    run = sql.get_or_create_run(db, 'abc', 'bernoulli', 'repro', 3, 10)
    sql.store_replicate(db, run, [record(2, 'lower', 0.1)])
    db.close()

    db = sql.create_db(path)
    run = sql.get_or_create_run(db, 'abc', 'bernoulli', 'repro', 3, 10)
    assert sql.completed_replicates(db, run) == {2}
    db.close()

    db = sql.create_db(path, overwrite=True)
    run = sql.get_or_create_run(db, 'abc', 'bernoulli', 'repro', 3, 10)
    assert sql.completed_replicates(db, run) == set()
    db.close()
