"""Finite-volume solver for a regularized chemotaxis-Navier-Stokes system
together with numerical checks of its a priori estimates."""

__version__ = "0.1.0"
