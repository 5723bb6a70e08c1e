"""Exception types shared across the package."""


class LcrError(Exception):
    """Base class for errors raised by :mod:`lcr`."""

    exit_code = 1


class DomainError(LcrError, ValueError):
    """An argument lies outside the domain of an operation."""

    exit_code = 2


class ParseError(LcrError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    exit_code = 3

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CapacityError(LcrError, ValueError):
    """The requested size exceeds what an exact routine supports."""

    exit_code = 4
