"""Exact elliptic-curve statistics over small prime fields."""

__version__ = "0.1.0"
