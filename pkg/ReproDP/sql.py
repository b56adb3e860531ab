#!/usr/bin/env python3

import math
from sqlalchemy import (Column, Integer, String, Float, DateTime, ForeignKey,
        UniqueConstraint, create_engine, func)
from sqlalchemy.orm import relationship, sessionmaker
from sqlalchemy.ext.declarative import declarative_base
from pathlib import Path
from os import remove

Base = declarative_base()
class Run(Base):
    '''One replicate study, identified by the digest of its
    configuration.
    '''

    __tablename__ = 'run'
    id = Column(Integer, primary_key=True)
    digest = Column(String, nullable=False, unique=True,
            doc='sha256 of the canonical configuration JSON')
    model = Column(String, nullable=False)
    method = Column(String, nullable=False)
    master_seed = Column(Integer, nullable=False)
    replicates = Column(Integer, nullable=False)
    created = Column(DateTime, server_default=func.now())
    rows = relationship('ReplicateRow', back_populates='run',
            order_by='ReplicateRow.id')

class ReplicateRow(Base):
    '''A single metric of a single replicate. Failed replicates store
    one row with metric `failure` and the error kind in `status`.
    '''

    __tablename__ = 'replicate_row'
    __table_args__ = (UniqueConstraint('run_id', 'replicate', 'coord',
        'metric'),)
    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey(Run.id), nullable=False)
    run = relationship('Run', back_populates='rows')
    replicate = Column(Integer, nullable=False)
    seed = Column(Integer, nullable=False)
    coord = Column(String, nullable=False, default='')
    metric = Column(String, nullable=False)
    value = Column(Float, nullable=True,
        doc='''Metric value; NULL for nan. Infinite limits are kept.
        ''')
    status = Column(String, nullable=False, default='ok')
    runtime_ms = Column(Integer, nullable=False, default=0)

    def as_record(self):

        value = math.nan if self.value is None else self.value
        return dict(replicate=self.replicate, seed=self.seed,
                coord=self.coord, metric=self.metric, value=value,
                status=self.status, runtime_ms=self.runtime_ms)

def create_db(dbfile,overwrite=False):
    '''Initialize the database file and return a session
    object.
    '''

    engine = create_engine(f'sqlite:///{dbfile}')
    Session = sessionmaker()
    Session.configure(bind=engine)

    pth = Path(dbfile)

    # Remove the file if specified
    if pth.exists() and overwrite:
        remove(pth)

    Base.metadata.create_all(engine)

    return Session()

def get_or_create_run(db_session, digest, model, method, master_seed,
        replicates):

    run = db_session.query(Run).filter(Run.digest==digest).first()

    if not run:

        run = Run(digest=digest, model=model, method=method,
                master_seed=master_seed, replicates=replicates)
        db_session.add(run)
        db_session.commit()

    return run

def completed_replicates(db_session, run):
    '''Replicate indices that already have rows for this run.
    '''

    return {r for (r,) in db_session.query(ReplicateRow.replicate) \
            .filter(ReplicateRow.run_id==run.id).distinct()}

def store_replicate(db_session, run, records):
    '''Persist the records of one replicate in a single transaction.
    '''

    for rec in records:

        value = rec['value']
        if value is not None and math.isnan(value): value = None

        db_session.add(ReplicateRow(run_id=run.id,
            replicate=rec['replicate'], seed=rec['seed'],
            coord=rec['coord'], metric=rec['metric'], value=value,
            status=rec['status'], runtime_ms=rec['runtime_ms']))

    db_session.commit()

def get_records(db_session, run):
    '''All stored records of a run ordered by replicate.
    '''

    return [row.as_record() for row in db_session.query(ReplicateRow) \
            .filter(ReplicateRow.run_id==run.id) \
            .order_by(ReplicateRow.replicate, ReplicateRow.id) \
            .all()]
