"""Folding/unfolding sequence experiments for rank-7 free group automorphisms."""

__version__ = "0.1.0"

from .errors import InputError, LogicError, NumericError, ResourceError

__all__ = ["InputError", "LogicError", "NumericError", "ResourceError", "__version__"]
