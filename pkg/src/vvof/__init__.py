"""Geometric volume-of-fluid interface evolution on uniform Cartesian grids.

The pieces are a color field on a staggered grid, PLIC reconstruction,
conservative split advection, height-function curvature, velocity models for
curvature flow and prescribed flows, diagnostics, and the benchmark cases.
"""
from .cases import CASE_NAMES, CaseConfig, ShapeSpec, builtin_case, run_case
from .grid import ColorField, Grid, VelocityField

__all__ = [
    "CASE_NAMES", "CaseConfig", "ColorField", "Grid", "ShapeSpec", "VelocityField",
    "builtin_case", "run_case",
]
__version__ = "0.1.0"
