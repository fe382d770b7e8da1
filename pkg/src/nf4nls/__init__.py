"""Spectral simulation, normal-form energies and Gaussian LIL experiments for the cubic fourth-order NLS on the circle."""

__version__ = "0.1.0"
