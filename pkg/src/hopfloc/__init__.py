"""Numerical Chern-Weil localization: forms on chart grids, graded bundles, Clifford signature model."""

__version__ = "0.1.0"
