"""Exception types shared across the package.

Everything raised deliberately by this package derives from
:class:`CondcovError`, so callers (and the command line driver) can catch
one base class. Most subclasses also derive from the closest builtin so
that generic ``except ValueError`` style handling keeps working.
"""


class CondcovError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CondcovError, ValueError):
    """A configuration object, file, or argument is invalid."""


class DimensionMismatch(CondcovError, ValueError):
    """Operands have incompatible shapes or sizes."""


class NonPositiveDiagonal(CondcovError, ValueError):
    """A covariance matrix has a diagonal entry at or below zero."""


class TooFewRows(CondcovError, ValueError):
    """An operation needs more observations than were supplied."""


class DegenerateColumn(CondcovError, ValueError):
    """A data column is constant and cannot be standardized."""


class ZeroWeightSum(CondcovError, ArithmeticError):
    """Every kernel weight underflowed to zero at some query point.

    This happens when the query lies many bandwidths away from all
    training covariates; the estimate is undefined there.
    """


class AllCandidatesInfeasible(CondcovError, RuntimeError):
    """Every bandwidth candidate produced an infinite validation loss."""


class CholeskyFailure(CondcovError, ArithmeticError):
    """A configured truth covariance is numerically indefinite."""


class ParseError(CondcovError, ValueError):
    """An input file could not be parsed."""


class EmptyAfterFilter(CondcovError, ValueError):
    """Too few rows survived the date filter and missing-value policy."""


class NonMonotoneTimestamps(CondcovError, ValueError):
    """Timestamps are not strictly increasing (duplicates included)."""


class UnsupportedGrid(CondcovError, ValueError):
    """Automatic rectangular evaluation grids need exactly two covariates."""
