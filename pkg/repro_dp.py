#!/usr/bin/env python3

from sys import exit
from ReproDP.cli import main

if __name__ == '__main__':
    exit(main())
