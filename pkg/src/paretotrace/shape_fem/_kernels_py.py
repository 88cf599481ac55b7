"""Numpy implementations of the FEM hot kernels.

These are the reference versions; ``_kernels_c`` (Cython) must agree with
them to rounding.

Conventions
-----------
* ``nodes``: (N, 2) float64, ``tris``: (E, 3) int64, counter-clockwise.
* dof ``2*k`` is the x-displacement of node ``k``, ``2*k + 1`` the y one.
* Stiffness is returned in LAPACK upper band storage for the dofs
  ``skip, skip+1, ...`` (the leading ``skip`` dofs are clamped):
  ``ab[bw + i - j, j] = K[i, j]`` for ``i <= j``.
* Stress rows are ``(s_xx, s_yy, s_xy)``; plane strain with Lame constants
  ``lam, mu``.
"""
from __future__ import annotations

import numpy as np


def _gradients(nodes, tris):
    p = nodes[tris]
    x0, x1, x2 = p[:, 0, 0], p[:, 1, 0], p[:, 2, 0]
    y0, y1, y2 = p[:, 0, 1], p[:, 1, 1], p[:, 2, 1]
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    b = np.stack([y1 - y2, y2 - y0, y0 - y1], axis=1)
    c = np.stack([x2 - x1, x0 - x2, x1 - x0], axis=1)
    return det, b, c


def triangle_areas(nodes, tris):
    det, _, _ = _gradients(np.asarray(nodes, float), np.asarray(tris))
    return 0.5 * det


def _strain_matrices(det, b, c):
    e = det.size
    bm = np.zeros((e, 3, 6))
    bm[:, 0, 0::2] = b
    bm[:, 1, 1::2] = c
    bm[:, 2, 0::2] = c
    bm[:, 2, 1::2] = b
    return bm / det[:, None, None]


def _elasticity(lam, mu):
    return np.array([[lam + 2 * mu, lam, 0.0],
                     [lam, lam + 2 * mu, 0.0],
                     [0.0, 0.0, mu]])


def assemble_banded(nodes, tris, lam, mu, skip, bw, ndof):
    nodes = np.asarray(nodes, float)
    tris = np.asarray(tris, np.int64)
    det, b, c = _gradients(nodes, tris)
    bm = _strain_matrices(det, b, c)
    d = _elasticity(lam, mu)
    ke = 0.5 * det[:, None, None] * np.einsum("eki,kl,elj->eij", bm, d, bm)
    dofs = np.empty((tris.shape[0], 6), np.int64)
    dofs[:, 0::2] = 2 * tris
    dofs[:, 1::2] = 2 * tris + 1
    rows = np.broadcast_to(dofs[:, :, None], ke.shape)
    cols = np.broadcast_to(dofs[:, None, :], ke.shape)
    keep = (rows <= cols) & (rows >= skip)
    ab = np.zeros((bw + 1, ndof - skip))
    np.add.at(ab, (bw + rows[keep] - cols[keep], cols[keep] - skip), ke[keep])
    return ab


def element_stress(nodes, tris, u, lam, mu):
    nodes = np.asarray(nodes, float)
    tris = np.asarray(tris, np.int64)
    det, b, c = _gradients(nodes, tris)
    bm = _strain_matrices(det, b, c)
    ue = np.empty((tris.shape[0], 6))
    ue[:, 0::2] = u[2 * tris]
    ue[:, 1::2] = u[2 * tris + 1]
    strain = np.einsum("eij,ej->ei", bm, ue)
    return strain @ _elasticity(lam, mu).T


def weibull_sum(stress, areas, sigma0, m, n_angles):
    """``sum_e area_e * mean_k ((n_k^T s_e n_k)^+ / sigma0)^m`` over the
    equispaced directions ``theta_k = 2 pi k / n_angles``."""
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    cc = np.cos(theta) ** 2
    ss = np.sin(theta) ** 2
    cs = 2.0 * np.cos(theta) * np.sin(theta)
    stress = np.asarray(stress, float)
    normal = (np.outer(stress[:, 0], cc) + np.outer(stress[:, 1], ss)
              + np.outer(stress[:, 2], cs))
    dens = (np.maximum(normal, 0.0) / sigma0) ** m
    return float(np.dot(np.asarray(areas, float), dens.mean(axis=1)))
