"""Traced interpreter and Galois slicer for an imperative ML-like core language."""

__version__ = "0.1.0"
