"""Exception types raised by the library.

Every error derives from :class:`GRFError` so callers (the CLI in
particular) can map library failures to a single exit code.
"""


class GRFError(Exception):
    """Base class for library errors."""


class DomainError(GRFError, ValueError):
    """Argument outside the domain of an operation."""


class InfeasibleError(GRFError):
    """Covariance data admits no positive spectral density."""


class ConvergenceError(GRFError):
    """An iterative method stopped before meeting its tolerance.

    The partial result, if any, is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InstabilityError(GRFError):
    """A filter has poles on or outside the unit circle."""


class SizeError(GRFError):
    """Problem size exceeds a configured cap."""


class DegenerateFilterError(GRFError):
    """A filter coefficient needed for noise reconstruction vanishes."""


class UnsupportedError(GRFError):
    """Operation not available for the given model."""


class RegularizationError(GRFError):
    """A covariance block stayed singular after regularization."""


class FormatError(GRFError):
    """Malformed or inconsistent file contents."""
