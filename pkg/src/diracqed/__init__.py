"""Quantum simulation of Dirac dynamics with a qubit coupled to driven cavity modes."""

__version__ = "0.1.0"
