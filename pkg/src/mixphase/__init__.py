"""Pseudo-spectral simulation and symbol verification for incompressible mixtures."""

__version__ = "0.1.0"
