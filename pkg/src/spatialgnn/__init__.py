"""Geographically weighted graph neural network toolkit."""

from .errors import NumericalError, SpatialGnnError, ValidationError

__version__ = "0.1.0"

__all__ = ["NumericalError", "SpatialGnnError", "ValidationError", "__version__"]
