"""Exception types shared across the package."""


class PopGPError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PopGPError, ValueError):
    """Raised when arguments violate a documented precondition."""


class NumericalError(PopGPError, ArithmeticError):
    """Raised when a computation produces or would produce non-finite values."""


class NotPositiveDefiniteError(NumericalError):
    """Raised when a covariance matrix cannot be factorized even with jitter."""


class ParseError(PopGPError, ValueError):
    """Raised for malformed scenario, chain or dataset files.

    The message carries the file line number and field where parsing failed.
    """

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
