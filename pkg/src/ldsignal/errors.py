"""Exception types shared across the package."""


class LDSignalError(Exception):
    """Base class for all package errors."""


class ParameterError(LDSignalError, ValueError):
    """An argument is outside its admissible range."""


class BasisError(LDSignalError, ValueError):
    """Coefficient basis of an argument does not match what the operation needs."""


class ResolutionError(LDSignalError, ValueError):
    """A sampling grid is too coarse for the requested frequency content."""


class DegenerateSchemeError(LDSignalError, ValueError):
    """A weight scheme is identically zero (or zero where positivity is required)."""


class NoGapError(LDSignalError, ValueError):
    """The signal energy does not exceed the threshold: the lower-tail bound is vacuous."""


class NumericError(LDSignalError, RuntimeError):
    """A numerical routine failed to converge."""


class NotACounterexampleError(LDSignalError, ValueError):
    """The supplied coefficient vector has a bounded tail functional on its support."""
