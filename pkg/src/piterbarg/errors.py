"""Exception types shared across the package.

Each class carries an ``exit_code`` used by the command line front end:
2 for usage/configuration problems, 3 for numerical failures.
"""


class PiterbargError(Exception):
    exit_code = 3


class NonEmbeddable(PiterbargError):
    """Circulant embedding has eigenvalues below tolerance at every tried size."""


class NonPSD(PiterbargError):
    """A covariance matrix that must be positive semi-definite is not."""


class InvalidHorizon(PiterbargError):
    """ln T does not exceed the largest long-range parameter."""


class GridMeshMismatch(PiterbargError):
    """Grid spacing is not an integer multiple of the mesh spacing."""


class EqualSpacings(PiterbargError):
    exit_code = 2


class InsufficientExceedances(PiterbargError):
    """Too few joint exceedance events for a tail-ratio estimate."""


class UnclassifiableGrid(PiterbargError):
    exit_code = 2


class MissingConstant(PiterbargError):
    """A Pickands-type constant required by a formula was not supplied."""


class ConfigMismatch(PiterbargError):
    exit_code = 2


class PreconditionError(PiterbargError):
    exit_code = 2
