"""Dissipative preparation of a two-atom singlet in a lossy optical cavity."""

__version__ = "0.1.0"
