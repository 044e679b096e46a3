"""Numerical laboratory for partially hyperbolic maps on tori."""

__version__ = "0.1.0"
