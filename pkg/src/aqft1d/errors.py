"""Exception hierarchy."""


class AQFTError(Exception):
    """Base class for all package errors."""


class DomainError(AQFTError, ValueError):
    """A point or map leaves the domain it must stay in."""


class NumericError(AQFTError, ArithmeticError):
    """A quadrature or root finder failed to converge.

    ``estimate`` carries the achieved error estimate.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class SupportError(AQFTError, ValueError):
    """A field's declared support class does not suit the operation."""


class IncompatibleError(AQFTError, ValueError):
    """Local data disagree on an overlap.

    ``worst`` is ``(error, t, x)`` for the worst offending sample.
    """

    def __init__(self, message, worst=None):
        super().__init__(message)
        self.worst = worst


class PreconditionError(AQFTError, ValueError):
    """An operation's precondition failed; ``deviation`` is the worst residual."""

    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class CoherenceError(AQFTError):
    """Structure constants disagree across a map beyond tolerance."""

    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class ConfigError(AQFTError, ValueError):
    """Malformed run configuration; ``path`` is the offending key path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
