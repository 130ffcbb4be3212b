"""
Command-line surface for robust fair k-center.
"""

from .app import app

__all__ = ["app"]
