"""Spectral laboratory for the inhomogeneous biharmonic nonlinear Schrodinger equation."""

__version__ = "0.4.0"
