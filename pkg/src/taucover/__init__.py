"""Tau covers of bihamiltonian integrable hierarchies."""

__version__ = "0.1.0"
