"""Colorful exceptions"""

# Definition of handy colours for printing
_default = "\x1b[00m"
_red = "\x1b[01;31m"


class ParamRomError(Exception):
    """Base class of all errors raised by paramrom.

    The ``exit_code`` is what the command line front end returns when the
    error reaches it.
    """

    exit_code = 1

    def __init__(self, message: str = "", *args):
        super().__init__(message, *args)
        self.message = message

    def __str__(self):
        """String representation."""
        return _red + self.message + _default


# ------------------------------------------
# Configuration and contract violations
# ------------------------------------------


class ConfigError(ParamRomError, ValueError):
    """Invalid configuration or violated input contract."""

    exit_code = 2


class LayoutMismatchError(ConfigError):
    """Snapshot sets with different variable layouts were combined."""


class DimensionMismatchError(ConfigError):
    """Array shapes disagree with the declared dimensions."""


class UnknownVariableError(ConfigError):
    """A variable name is not part of the layout."""


class RankError(ConfigError):
    """Rank bounds violated or energy threshold unreachable."""


# ------------------------------------------
# Numerical failures
# ------------------------------------------


class NumericalError(ParamRomError, ArithmeticError):
    """Numerical failure (divergence, conditioning, degenerate data)."""

    exit_code = 3


class NonFiniteError(NumericalError):
    """Inputs contain NaN or Inf entries."""


class DegenerateInputError(NumericalError):
    """Zero matrix or zero-norm group where a normalization is required."""


class DivergenceError(NumericalError):
    """ROM integration produced a non-finite state."""

    def __init__(self, message: str = "", step: int = -1):
        super().__init__(message)
        self.step = step


class SolverError(NumericalError):
    """Factorization of the regularized normal equations failed."""


class StabilityError(NumericalError):
    """Synthetic FOM time step would violate its stability limits."""


class AllCandidatesDivergedError(NumericalError):
    """Every candidate of a regularization sweep diverged."""


# ------------------------------------------
# Parameter-domain geometry
# ------------------------------------------


class GeometryError(ParamRomError, ValueError):
    """Training parameters do not admit the requested interpolation."""

    exit_code = 2


class CollinearParametersError(GeometryError):
    """No full-dimensional simplex can be formed from the training points."""


class DuplicateParameterError(GeometryError):
    """The same training parameter appears more than once."""


class ExtrapolationError(GeometryError):
    """Query parameter lies outside the convex hull of the training points."""


# ------------------------------------------
# Files
# ------------------------------------------


class SnapshotIOError(ParamRomError, IOError):
    """Missing or unreadable manifest / payload file."""

    exit_code = 4


class ArchiveError(ParamRomError, IOError):
    """Problem reading a trained-model archive."""

    exit_code = 4


class ArchiveVersionError(ArchiveError):
    """Archive format tag, version or feature ordering does not match."""


class ArchiveCorruptedError(ArchiveError):
    """Archive is empty, incomplete or fails its checksums."""
