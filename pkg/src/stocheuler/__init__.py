"""Stochastic 2D Euler with transport noise: spectral Galerkin simulator."""

__version__ = "0.1.0"
