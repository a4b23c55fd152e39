"""Dissipative preparation of three-qubit W states in trapped-ion crystals."""

__version__ = "0.1.0"
