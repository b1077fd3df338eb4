"""Bi-parameter paraproduct and Coifman-Meyer multiplier harnesses."""

__version__ = "0.1.0"
