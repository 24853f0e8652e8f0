"""Exception types shared across the toolkit."""


class LookalikeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(LookalikeError, ValueError):
    """Input violates a documented contract (bad record, bad permutation, ...)."""


class ParseError(ValidationError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += str(path)
        if line is not None:
            prefix += f":{line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class NotFoundError(LookalikeError, KeyError):
    """A referenced item, task or worker does not exist."""

    def __str__(self) -> str:  # KeyError quotes its args; keep the plain message
        return Exception.__str__(self)


class UndefinedMetricError(LookalikeError, ArithmeticError):
    """A metric has no defined value on this input (e.g. empty denominator)."""
