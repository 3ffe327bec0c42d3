"""Exception hierarchy shared by all zerovar modules."""


class ZerovarError(Exception):
    """Base class for all library errors."""


class DomainError(ZerovarError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class CapacityError(ZerovarError, ValueError):
    """A requested degree exceeds what a recurrence table supports."""


class ParseError(ZerovarError, ValueError):
    """A custom recurrence file is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedError(ZerovarError):
    """Operation not available for this kind of input."""


class DegenerateError(ZerovarError, ArithmeticError):
    """Two evaluation points are too close for the unscaled formulas."""


class ConsistencyError(ZerovarError, ArithmeticError):
    """An internal numerical invariant was violated beyond rounding."""


class ResourceError(ZerovarError):
    """An evaluation or sample budget was exhausted."""
