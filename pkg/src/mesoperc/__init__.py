"""Mesoscopic percolation workbench."""

from .conformal import HolomorphyReport, ModulusResult, cardy, modulus, morera_qc_check, predict_H
from .lattices import (
    MarkedDomain,
    MarkedRectangleDomain,
    MarkedTriangleDomain,
    build_mesoscopic,
    builtin_torus,
    parallelogram_domain,
    rhombus_domain,
    triangle_domain,
    triangle_lattice_domain,
)
from .mesh import Embedding, Triangulation, beltrami, refine, subdivide, validate
from .packing import CirclePacking, pack, solve_radii, torus_period
from .render import render

__all__ = [
    "CirclePacking",
    "Embedding",
    "HolomorphyReport",
    "MarkedDomain",
    "MarkedRectangleDomain",
    "MarkedTriangleDomain",
    "ModulusResult",
    "Triangulation",
    "beltrami",
    "build_mesoscopic",
    "builtin_torus",
    "cardy",
    "modulus",
    "morera_qc_check",
    "pack",
    "parallelogram_domain",
    "predict_H",
    "refine",
    "render",
    "rhombus_domain",
    "solve_radii",
    "subdivide",
    "torus_period",
    "triangle_domain",
    "triangle_lattice_domain",
    "validate",
]
