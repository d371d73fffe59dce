"""Numerical checks of crystalline-order inequalities for local and nonlocal
pair potentials."""

__version__ = "0.1.0"
