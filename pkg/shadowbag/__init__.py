"""Variational classical-shadow ground states for 1-D spin chains."""

__version__ = "0.1.0"
