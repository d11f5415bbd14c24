"""Exception hierarchy shared by every module of the package."""


class RearrangementError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(RearrangementError, ValueError):
    """Invalid domain descriptor (empty mask, anisotropic spacing, ...)."""


class SingularSampleError(RearrangementError, ValueError):
    """A sampled or parsed value is not finite."""


class FormatError(RearrangementError, ValueError):
    """Malformed text file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RangeError(RearrangementError, ValueError):
    """A parameter (epsilon, s-range, threshold) lies outside its admissible range."""
