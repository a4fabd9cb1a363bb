"""Computational toolkit for KMS states on Toeplitz algebras of graph shifts."""

__version__ = "0.1.0"
