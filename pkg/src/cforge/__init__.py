"""Arithmetic progressions of three-prime Carmichael numbers in a residue class."""

__version__ = "0.1.0"
