"""Exception hierarchy shared across the package."""


class QuboForgeError(Exception):
    """Base class for every error raised by this package."""


class ParseError(QuboForgeError):
    """Malformed benchmark file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFormatError(ParseError):
    pass


class StructuralError(ParseError):
    """File parsed but its contents contradict its own header."""


class ContractError(QuboForgeError, ValueError):
    """A caller violated a documented precondition."""


class DegenerateNormalizationError(QuboForgeError, ValueError):
    pass


class EdgeViolationError(QuboForgeError, ValueError):
    pass


class LimitExceededError(QuboForgeError):
    """Refusal to start a computation whose size exceeds a configured limit."""
