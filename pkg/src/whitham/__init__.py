"""Periodic pseudospectral solver and inequality checks for a dissipative
Whitham-type equation with optional hyperviscosity."""

__version__ = "0.1.0"
