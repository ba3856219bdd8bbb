"""Rotating star-planet polytropic equilibria by constrained energy minimization."""

__version__ = "0.1.0"
