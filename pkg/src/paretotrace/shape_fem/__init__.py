"""Desk-scale ceramic-joint shape problem: P1 plane-strain elasticity,
area and Weibull-intensity objectives, B-spline meanline/thickness design."""
from .fem import (DEFAULT_N_ANGLES, AssemblyError, FemState, solve_state,
                  weibull_intensity)
from .geometry import (GeometryError, MaterialData, Mesh, ShapeGeometry,
                       basis_matrix, bspline_profiles, build_mesh, export_mesh,
                       volume)
from . import kernels
from .problem import (ShapeProblem, sigma0_for_weight, test_case_1, test_case_2,
                      weibull_direction_factor)

__all__ = [
    "AssemblyError", "DEFAULT_N_ANGLES", "FemState", "GeometryError",
    "MaterialData", "Mesh", "ShapeGeometry", "ShapeProblem", "basis_matrix",
    "bspline_profiles", "build_mesh", "export_mesh", "kernels", "sigma0_for_weight",
    "solve_state", "test_case_1", "test_case_2", "volume", "weibull_direction_factor",
    "weibull_intensity",
]
