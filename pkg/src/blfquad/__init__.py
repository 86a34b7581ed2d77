"""Barrier Lyapunov tracking control for manipulators and quadrotors."""

__version__ = "0.1.0"
