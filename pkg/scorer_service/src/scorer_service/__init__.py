"""taxassign scorer service."""

from .model import TokenScorer
from .server import serve

__all__ = ["TokenScorer", "serve"]
