"""Exception hierarchy.

Every error raised by the package derives from :class:`OsfsError`, and most
also derive from the closest builtin so callers can catch ``ValueError`` or
``IndexError`` without importing this module.
"""


class OsfsError(Exception):
    """Base class for all package errors."""


class ShapeError(OsfsError, ValueError):
    """A vector or matrix has the wrong dimension."""


class SequencingError(OsfsError, ValueError):
    """Sample time indices are not strictly increasing by one."""


class RangeError(OsfsError, IndexError):
    """A count or index lies outside its admissible range."""


class InsufficientDataError(OsfsError, ValueError):
    """Too few samples (or history rows) to compute a statistic."""


class ContractError(OsfsError, ValueError):
    """Arguments violate a documented precondition."""


class CatalogError(OsfsError, KeyError):
    """A feature name is not part of the catalog."""

    def __str__(self):  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class EmptyCatalogError(OsfsError, ValueError):
    """A filtering step removed every feature."""


class UndefinedNormalizationError(OsfsError, ZeroDivisionError):
    """A normalizing quantity (mean target, stability denominator) is zero."""


class TraceFormatError(OsfsError, ValueError):
    """A trace file cannot be parsed."""


class StreamExhaustedError(OsfsError):
    """The sample stream ended before the search could finish.

    ``partial`` carries the best state reached so far (an ``OsfsResult`` when
    at least one feature set was computed, otherwise ``None``) and
    ``samples_read`` the number of samples that were available.
    """

    def __init__(self, message, partial=None, samples_read=0):
        super().__init__(message)
        self.partial = partial
        self.samples_read = samples_read
