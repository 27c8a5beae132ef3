"""Symplectic curvature flow laboratory on flat tori."""

__version__ = "0.1.0"
