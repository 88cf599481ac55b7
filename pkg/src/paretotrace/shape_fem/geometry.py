"""Meanline/thickness B-spline geometry of the 2D joint and its mesh.

The design vector holds the interior B-spline coefficients
``x = (x_ml[1:-1], x_th[1:-1])``. The end coefficients are pinned to the
boundary data (clamped splines interpolate their end coefficients), which
leaves ``2 * (n_basis - 2)`` free variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.interpolate import BSpline

from ..core import InputError
from . import kernels

DIAGONAL_MIRRORED = "mirrored"
DIAGONAL_LL_UR = "ll-ur"


class GeometryError(InputError):
    def __init__(self, message: str, column: Optional[int] = None):
        self.column = column
        super().__init__(message)


@dataclass(frozen=True)
class MaterialData:
    """Isotropic material, Weibull parameters and loads (SI units)."""

    youngs_modulus: float = 320e9
    poisson_ratio: float = 0.25
    weibull_modulus: float = 5.0
    # not pinned by the source; ultimate tensile strength used as default
    sigma0: float = 140e6
    surface_load: float = 1e7
    body_force: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.youngs_modulus > 0:
            raise InputError("Young's modulus must be positive")
        if not 0.0 < self.poisson_ratio < 0.5:
            raise InputError("Poisson ratio must lie in (0, 0.5)")
        if not 5.0 <= self.weibull_modulus <= 25.0:
            raise InputError("Weibull modulus must lie in [5, 25]")
        if not self.sigma0 > 0:
            raise InputError("sigma0 must be positive")
        object.__setattr__(self, "body_force", tuple(float(v) for v in self.body_force))

    @property
    def lame_lambda(self) -> float:
        e, nu = self.youngs_modulus, self.poisson_ratio
        return nu * e / ((1 + nu) * (1 - 2 * nu))

    @property
    def lame_mu(self) -> float:
        return self.youngs_modulus / (2 * (1 + self.poisson_ratio))


@dataclass(frozen=True, eq=False)
class ShapeGeometry:
    nx: int = 41
    ny: int = 7
    length: float = 1.0
    left_height: float = 0.2
    right_height: float = 0.2
    left_midline: float = 0.0
    right_midline: float = 0.0
    n_basis: int = 5
    degree: int = 3
    diagonal: str = DIAGONAL_MIRRORED
    design: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise InputError("mesh needs at least 2 nodes per direction")
        if self.n_basis < 2:
            raise InputError("need at least two B-spline basis functions")
        if self.degree < 1:
            raise InputError("B-spline degree must be positive")
        if self.diagonal not in (DIAGONAL_MIRRORED, DIAGONAL_LL_UR):
            raise InputError(f"unknown diagonal convention {self.diagonal!r}")
        if not self.length > 0:
            raise InputError("length must be positive")
        design = self.design
        if design is None:
            design = self.linear_design()
        design = np.array(design, dtype=float)
        if design.shape != (self.n_free,):
            raise InputError(f"design has shape {design.shape}, expected ({self.n_free},)")
        design.setflags(write=False)
        object.__setattr__(self, "design", design)

    @property
    def n_free(self) -> int:
        return 2 * (self.n_basis - 2)

    def linear_design(self) -> np.ndarray:
        """Coefficients interpolating the boundary data linearly."""
        t = np.linspace(0.0, 1.0, self.n_basis)[1:-1]
        ml = self.left_midline + t * (self.right_midline - self.left_midline)
        th = self.left_height + t * (self.right_height - self.left_height)
        return np.concatenate([ml, th])

    def with_design(self, design) -> "ShapeGeometry":
        return replace(self, design=np.asarray(design, dtype=float))

    def coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        k = self.n_basis - 2
        ml = np.concatenate([[self.left_midline], self.design[:k], [self.right_midline]])
        th = np.concatenate([[self.left_height], self.design[k:], [self.right_height]])
        return ml, th

    def columns(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.nx)


@lru_cache(maxsize=32)
def _basis(nx: int, n_basis: int, degree: int, length: float) -> np.ndarray:
    p = min(degree, n_basis - 1)
    n_inner = n_basis - p - 1
    inner = length * np.arange(1, n_inner + 1) / (n_inner + 1)
    knots = np.concatenate([np.zeros(p + 1), inner, np.full(p + 1, length)])
    z = np.linspace(0.0, length, nx)
    mat = BSpline.design_matrix(z, knots, p).toarray()
    mat.setflags(write=False)
    return mat


def basis_matrix(geometry: ShapeGeometry) -> np.ndarray:
    """Clamped B-spline basis values, shape (nx, n_basis), at the mesh
    columns. Interior knots are uniform."""
    return _basis(geometry.nx, geometry.n_basis, geometry.degree, float(geometry.length))


def bspline_profiles(geometry: ShapeGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Meanline and thickness evaluated at every mesh column."""
    basis = basis_matrix(geometry)
    ml, th = geometry.coefficients()
    return basis @ ml, basis @ th


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    nx: int
    ny: int

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def areas(self) -> np.ndarray:
        return kernels.triangle_areas(self.nodes, self.elements)

    def right_boundary(self) -> np.ndarray:
        return np.arange((self.nx - 1) * self.ny, self.nx * self.ny)

    def left_boundary(self) -> np.ndarray:
        return np.arange(self.ny)


@lru_cache(maxsize=8)
def _connectivity(nx: int, ny: int, diagonal: str) -> np.ndarray:
    tris = []
    half = (ny - 1) / 2.0
    for i in range(nx - 1):
        for j in range(ny - 1):
            ll = i * ny + j
            lr = (i + 1) * ny + j
            ul = i * ny + j + 1
            ur = (i + 1) * ny + j + 1
            if diagonal == DIAGONAL_LL_UR or j + 0.5 < half:
                tris.append((ll, lr, ur))
                tris.append((ll, ur, ul))
            else:
                tris.append((ll, lr, ul))
                tris.append((lr, ur, ul))
    arr = np.array(tris, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def build_mesh(geometry: ShapeGeometry) -> Mesh:
    """Structured triangulation: column ``i`` at ``z = i * length/(nx-1)``,
    ``ny`` nodes spread uniformly over ``meanline +- thickness/2``.

    Node ``(i, j)`` has index ``i * ny + j``. With the ``mirrored`` diagonal
    convention, quad rows below the meanline are split lower-left to
    upper-right and rows above it upper-left to lower-right, so the mesh of
    a straight joint is symmetric about its meanline. ``ll-ur`` splits every
    quad lower-left to upper-right.
    """
    ml, th = bspline_profiles(geometry)
    bad = np.flatnonzero(~(th > 0.0))
    if bad.size:
        col = int(bad[0])
        raise GeometryError(f"non-positive thickness {th[col]:.6g} at column {col}", col)
    z = geometry.columns()
    frac = np.arange(geometry.ny) / (geometry.ny - 1)
    ys = (ml - 0.5 * th)[:, None] + th[:, None] * frac[None, :]
    nodes = np.empty((geometry.nx * geometry.ny, 2))
    nodes[:, 0] = np.repeat(z, geometry.ny)
    nodes[:, 1] = ys.ravel()
    return Mesh(nodes, _connectivity(geometry.nx, geometry.ny, geometry.diagonal),
                geometry.nx, geometry.ny)


def volume(geometry: ShapeGeometry) -> float:
    """Area of the meshed joint (exact for the piecewise-linear outline)."""
    return float(build_mesh(geometry).areas().sum())


def export_mesh(mesh: Mesh, path) -> None:
    """Plain-text mesh: ``nodes N``, N lines ``x y``, ``elements E``, E lines
    of 0-based node indices."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nodes {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"elements {mesh.elements.shape[0]}\n")
        for a, b, c in mesh.elements:
            fh.write(f"{a} {b} {c}\n")
