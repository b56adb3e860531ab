#!/usr/bin/env python3
'''Exception hierarchy. The CLI maps these onto exit codes, see
`ReproDP.cli.EXIT_CODES`.
'''

class ReproError(Exception):
    '''Base class for every error raised by ReproDP.
    '''

    kind = 'error'

class InvalidArgumentError(ReproError, ValueError):
    kind = 'invalid-argument'

class ConfigError(ReproError):
    kind = 'config-error'

class InfeasibleBandError(ReproError):
    '''Raised when alpha < 1/(R+1): no order-statistic band exists.
    '''

    kind = 'infeasible-band'

class ReproNumericError(ReproError, ArithmeticError):
    '''A computation produced a non-finite or non-convergent result.
    `theta` holds the parameter being evaluated when one exists.
    '''

    kind = 'numeric-error'

    def __init__(self, message, theta=None):

        self.theta = None if theta is None else tuple(
            float(v) for v in theta
        )
        if self.theta is not None:
            message = f'{message} (theta={list(self.theta)})'
        super().__init__(message)

class DegenerateCovarianceError(ReproNumericError):
    kind = 'degenerate-covariance'

class PathologicalBallError(ReproNumericError):
    kind = 'pathological-ball'

class BracketError(ReproNumericError):
    kind = 'bracket-error'

class UnboundedGridError(ReproError):
    kind = 'unbounded-grid'
