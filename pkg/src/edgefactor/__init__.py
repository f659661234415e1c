"""Edge factors: how often a location's research builds on recent ideas."""

from .errors import EdgeFactorError, ValidationError

__version__ = "0.1.0"

__all__ = ["EdgeFactorError", "ValidationError", "__version__"]
