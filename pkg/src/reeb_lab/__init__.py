"""Numerical workbench for Reeb orbits, Maslov indices, self-linking and
symplectic disc fillings on star-shaped hypersurfaces of R^4 = C^2."""

__version__ = "0.1.0"

from .surface import Ellipsoid, ImplicitSurface, PolynomialSurface, Sphere, pinching_scan
from .dynamics import PeriodicOrbit, SL2Path, find_periodic_orbit, flow, linearized_path
from .maslov import maslov_index, rotation, rotation_via_curvature
from .knot import TransverseKnot, hopf_fiber, self_linking, total_curvature, torus_orbit
from .filling import (
    ImmersedDisc,
    embedded_filling,
    linear_filling,
    symplectic_check,
    tangential_index,
    verify_theorem1,
)

__all__ = [
    "Ellipsoid", "ImplicitSurface", "PolynomialSurface", "Sphere", "pinching_scan",
    "PeriodicOrbit", "SL2Path", "find_periodic_orbit", "flow", "linearized_path",
    "maslov_index", "rotation", "rotation_via_curvature",
    "TransverseKnot", "hopf_fiber", "self_linking", "total_curvature", "torus_orbit",
    "ImmersedDisc", "embedded_filling", "linear_filling", "symplectic_check", "tangential_index",
    "verify_theorem1",
]
