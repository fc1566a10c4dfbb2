"""Offline figure rendering for bflab evidence files (CSV logs, verdict JSON)."""

from .core import KINDS, FigureError, FigureSpec, render

__version__ = "0.1.0"

__all__ = ["FigureError", "FigureSpec", "KINDS", "render", "__version__"]
