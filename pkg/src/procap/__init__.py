"""procap: bounds on quantum-process property measures from two settings."""

from ._backend import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
