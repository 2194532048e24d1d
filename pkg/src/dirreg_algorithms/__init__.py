"""Determining sets of direction pairs, derivative reconstruction and sharpness checks."""

__version__ = "0.1.0"
