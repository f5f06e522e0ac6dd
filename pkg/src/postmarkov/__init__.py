"""Collisional-model derivation and exact solution of a post-Markovian master equation."""

__version__ = "0.1.0"
