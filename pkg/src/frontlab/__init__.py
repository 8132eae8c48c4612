"""Spectral lab for a weakly nonlinear front equation and its Kuramoto-Sivashinsky limit."""

__version__ = "0.1.0"
