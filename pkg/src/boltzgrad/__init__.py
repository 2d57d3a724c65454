"""Boltzmann-Grad limit of a periodic quantum Lorentz gas, numerically."""

__version__ = "0.1.0"
