"""Simulation laboratory for hash-based quantum state group actions."""

__version__ = "0.1.0"
