"""Multirate Adams-Bashforth integrators and their analysis tools."""

__version__ = "0.1.0"
