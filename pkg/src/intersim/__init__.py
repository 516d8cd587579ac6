"""Deterministic simulator and mechanism library for auction-based road intersections."""

__version__ = "0.1.0"
