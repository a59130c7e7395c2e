"""Unitary (Stinespring) simulation of quantum measurement."""

__version__ = "0.1.0"
