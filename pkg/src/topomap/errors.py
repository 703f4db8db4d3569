"""Exception types shared across the package."""

from ._backend import CascadeOverflow as _OVERFLOW_TYPES


class InvalidArgument(ValueError):
    """A precondition on an argument or configuration value was violated."""


class ParseError(ValueError):
    """Malformed input file.  ``location`` is a byte offset or row number."""

    def __init__(self, message: str, location: int | None = None):
        super().__init__(message)
        self.location = location


class DeadlockError(RuntimeError):
    """The asynchronous engine stopped making progress with work in flight."""


class UnitAutonomyViolation(RuntimeError):
    """An agent addressed a unit that is not itself or one of its declared links."""


#: Both backends raise their own ``CascadeOverflow``; catch this tuple.
CascadeOverflow = _OVERFLOW_TYPES
