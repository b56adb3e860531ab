#!/usr/bin/env python3

from pathlib import Path
from setuptools import setup

setup(
    name='repro-dp',
    version='0.1.0',
    description='Simulation-based inference on differentially private releases',
    packages=['ReproDP'],
    python_requires='>=3.8',
    install_requires=[
        l for l in Path(__file__).with_name('requirements.txt')
            .read_text().splitlines()
        if l and not l.startswith('pytest')
    ],
    entry_points={'console_scripts': ['repro-dp=ReproDP.cli:main']},
    scripts=['repro_dp.py'],
)
