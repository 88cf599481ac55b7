"""Plane-strain P1 elasticity on the joint mesh and the Weibull functional.

The left column is clamped (u = 0); a horizontal traction of magnitude
``surface_load`` pulls on the right column; top and bottom are traction
free. Node numbering is column-major, so after dropping the clamped dofs
the stiffness matrix is banded with half-bandwidth ``2*ny + 3`` and is
solved as a banded SPD system.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from . import kernels
from .geometry import MaterialData, Mesh, ShapeGeometry, build_mesh

DEFAULT_N_ANGLES = 64


class AssemblyError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class FemState:
    mesh: Mesh
    stiffness_band: np.ndarray
    bandwidth: int
    n_fixed: int
    load: np.ndarray
    displacement: np.ndarray
    stress: np.ndarray
    areas: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def elements(self) -> np.ndarray:
        return self.mesh.elements

    @property
    def free_displacement(self) -> np.ndarray:
        return self.displacement[self.n_fixed:]

    def stiffness(self) -> scipy.sparse.csr_matrix:
        """Stiffness on the free dofs as a sparse symmetric matrix."""
        ab = self.stiffness_band
        bw = self.bandwidth
        n = ab.shape[1]
        diags, offsets = [], []
        for k in range(bw + 1):
            diags.append(ab[bw - k, k:])
            offsets.append(k)
        upper = scipy.sparse.diags(diags, offsets, shape=(n, n), format="csr")
        strict = scipy.sparse.triu(upper, k=1)
        return (upper + strict.T).tocsr()

    def stress_tensors(self) -> np.ndarray:
        s = self.stress
        out = np.empty((s.shape[0], 2, 2))
        out[:, 0, 0] = s[:, 0]
        out[:, 1, 1] = s[:, 1]
        out[:, 0, 1] = out[:, 1, 0] = s[:, 2]
        return out

    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.stiffness() @ self.free_displacement - self.load))


def load_vector(mesh: Mesh, material: MaterialData, areas: np.ndarray) -> np.ndarray:
    f = np.zeros(2 * mesh.n_nodes)
    right = mesh.right_boundary()
    ys = mesh.nodes[right, 1]
    edge = np.abs(np.diff(ys))
    g = material.surface_load
    # consistent load of a constant traction on a linear edge: half per end
    np.add.at(f, 2 * right[:-1], 0.5 * g * edge)
    np.add.at(f, 2 * right[1:], 0.5 * g * edge)
    bx, by = material.body_force
    if bx or by:
        for k in range(3):
            np.add.at(f, 2 * mesh.elements[:, k], bx * areas / 3.0)
            np.add.at(f, 2 * mesh.elements[:, k] + 1, by * areas / 3.0)
    return f


def solve_state(geometry: ShapeGeometry, material: MaterialData,
                mesh: Mesh | None = None) -> FemState:
    if mesh is None:
        mesh = build_mesh(geometry)
    lam, mu = material.lame_lambda, material.lame_mu
    ndof = 2 * mesh.n_nodes
    n_fixed = 2 * mesh.ny
    bw = 2 * mesh.ny + 3
    areas = np.asarray(kernels.triangle_areas(mesh.nodes, mesh.elements))
    ab = kernels.assemble_banded(mesh.nodes, mesh.elements, lam, mu, n_fixed, bw, ndof)
    f = load_vector(mesh, material, areas)[n_fixed:]
    u = np.zeros(ndof)
    if np.any(f):
        try:
            u[n_fixed:] = scipy.linalg.solveh_banded(ab, f, lower=False,
                                                     check_finite=True)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
            raise AssemblyError(f"stiffness matrix is singular or indefinite: {exc}") from exc
    stress = np.asarray(kernels.element_stress(mesh.nodes, mesh.elements, u, lam, mu))
    return FemState(mesh, ab, bw, n_fixed, f, u, stress, areas)


def weibull_intensity(state: FemState, material: MaterialData,
                      n_angles: int = DEFAULT_N_ANGLES) -> float:
    """Expected number of critical cracks,

        1/(2 pi) * int_Omega int_{S^1} ((n^T sigma n)^+ / sigma0)^m dn dz,

    with piecewise constant stress (exact in space) and the trapezoid rule
    on ``n_angles`` equispaced directions.
    """
    if n_angles < 1:
        raise ValueError("n_angles must be positive")
    return float(kernels.weibull_sum(state.stress, state.areas, material.sigma0,
                                     float(material.weibull_modulus), int(n_angles)))
