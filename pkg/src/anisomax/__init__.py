"""Anisotropic dilation grids, atomic decompositions, and maximal operators."""

__version__ = "0.1.0"
