"""Numerical laboratory for curved Kakeya/Nikodym maximal functions and their oscillatory integrals."""
from .errors import CKLError
from .phases import ExponentTable, PhaseSpec, exponent_table, gauss_map, phase, verify_nondegeneracy
from .curves import solve_psi
from .tubes import GridField, Tube, TubeFamily, build_family, rasterize_multiplicity

__version__ = "0.1.0"

__all__ = [
    "CKLError",
    "ExponentTable",
    "GridField",
    "PhaseSpec",
    "Tube",
    "TubeFamily",
    "build_family",
    "exponent_table",
    "gauss_map",
    "phase",
    "rasterize_multiplicity",
    "solve_psi",
    "verify_nondegeneracy",
]
