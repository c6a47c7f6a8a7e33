"""Computational toolkit for dyadic harmonic analysis on lattice step functions."""

__version__ = "0.1.0"
