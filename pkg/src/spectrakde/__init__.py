"""Kernel estimates of limiting spectral densities of sample covariance matrices."""

__version__ = "0.1.0"
