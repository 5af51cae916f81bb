"""Exception types shared across the package."""


class SpatialGnnError(Exception):
    """Base class for all package errors."""


class ValidationError(SpatialGnnError, ValueError):
    """Input data or configuration violates a documented invariant."""


class NumericalError(SpatialGnnError, ArithmeticError):
    """A computation produced non-finite values."""
