"""Smooth families of 1-dimensional field theories, checked numerically."""
__version__ = "0.1.0"
