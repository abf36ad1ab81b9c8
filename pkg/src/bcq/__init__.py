"""Exact verification of conditional Borel-Cantelli statements on finite models."""

__version__ = "0.1.0"
