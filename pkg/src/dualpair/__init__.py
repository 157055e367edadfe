"""Numerical and symbolic checks for dual pairs of Poisson maps."""

__version__ = "0.1.0"
