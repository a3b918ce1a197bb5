"""Numerical laboratory for the degenerate transmission eigenvalue problem."""

__version__ = "0.1.0"
