"""Thin-plate dimension-reduction lab: 3D elasticity on a shrinking plate
family, the clamped Kirchhoff-Love limit and convergence diagnostics."""

__version__ = "0.1.0"
