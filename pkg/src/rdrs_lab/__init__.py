"""Game-based dynamic pricing and scheduling in a regime-switching environment."""
from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
