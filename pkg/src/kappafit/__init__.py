"""CMA-ES toolkit for fitting the concrete shear degradation function."""

__version__ = "0.1.0"
