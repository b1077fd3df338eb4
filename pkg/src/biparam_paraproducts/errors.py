"""Exception hierarchy shared by the library and the CLI."""

from typing import Optional


class BiparamError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationFailure(BiparamError, ValueError):
    """A precondition of an operation was violated."""

    exit_code = 2


class ToleranceFailure(BiparamError):
    """A numeric certificate did not meet its tolerance."""

    exit_code = 3


class ThresholdTooSmallError(ValidationFailure):
    """The exceptional-set threshold C leaves |Ω̃| too large."""

    def __init__(self, message: str, suggested_threshold: Optional[float] = None):
        super().__init__(message)
        self.suggested_threshold = suggested_threshold
