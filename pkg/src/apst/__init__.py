"""Prediction suffix trees with approximate (Hamming) suffix matching."""

__version__ = "0.1.0"
