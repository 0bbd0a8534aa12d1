"""Pressure-robust smoothing for interior-penalty dG discretisations of Stokes."""

__version__ = "0.1.0"
