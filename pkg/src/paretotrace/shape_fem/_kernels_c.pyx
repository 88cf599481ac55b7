# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled FEM kernels. Same contracts as ``_kernels_py``."""
import numpy as np
from libc.math cimport cos, floor, sin, pow, M_PI


cdef inline void _element(const double[:, :] nodes, const long long[:, :] tris,
                          Py_ssize_t e, double* det, double* b, double* c) noexcept nogil:
    cdef long long n0 = tris[e, 0], n1 = tris[e, 1], n2 = tris[e, 2]
    cdef double x0 = nodes[n0, 0], y0 = nodes[n0, 1]
    cdef double x1 = nodes[n1, 0], y1 = nodes[n1, 1]
    cdef double x2 = nodes[n2, 0], y2 = nodes[n2, 1]
    det[0] = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    b[0] = y1 - y2
    b[1] = y2 - y0
    b[2] = y0 - y1
    c[0] = x2 - x1
    c[1] = x0 - x2
    c[2] = x1 - x0


cdef inline void _strain_matrix(double det, double* b, double* c, double* bm) noexcept nogil:
    # bm is 3x6 row-major
    cdef int i
    for i in range(18):
        bm[i] = 0.0
    for i in range(3):
        bm[0 * 6 + 2 * i] = b[i] / det
        bm[1 * 6 + 2 * i + 1] = c[i] / det
        bm[2 * 6 + 2 * i] = c[i] / det
        bm[2 * 6 + 2 * i + 1] = b[i] / det


def triangle_areas(nodes, tris):
    cdef const double[:, :] nv = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const long long[:, :] tv = np.ascontiguousarray(tris, dtype=np.int64)
    cdef Py_ssize_t ne = tv.shape[0], e
    out = np.empty(ne)
    cdef double[:] ov = out
    cdef double det
    cdef double b[3]
    cdef double c[3]
    with nogil:
        for e in range(ne):
            _element(nv, tv, e, &det, b, c)
            ov[e] = 0.5 * det
    return out


def assemble_banded(nodes, tris, double lam, double mu, Py_ssize_t skip,
                    Py_ssize_t bw, Py_ssize_t ndof):
    cdef const double[:, :] nv = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const long long[:, :] tv = np.ascontiguousarray(tris, dtype=np.int64)
    ab = np.zeros((bw + 1, ndof - skip))
    cdef double[:, :] av = ab
    cdef Py_ssize_t ne = tv.shape[0], e, i, j, k, l
    cdef double det, area, s
    cdef double b[3]
    cdef double c[3]
    cdef double bm[18]
    cdef double db[18]
    cdef double d[9]
    cdef long long dofs[6]
    cdef long long gi, gj
    d[0] = lam + 2 * mu; d[1] = lam; d[2] = 0.0
    d[3] = lam; d[4] = lam + 2 * mu; d[5] = 0.0
    d[6] = 0.0; d[7] = 0.0; d[8] = mu
    with nogil:
        for e in range(ne):
            _element(nv, tv, e, &det, b, c)
            _strain_matrix(det, b, c, bm)
            area = 0.5 * det
            for k in range(3):
                for j in range(6):
                    s = 0.0
                    for l in range(3):
                        s = s + d[k * 3 + l] * bm[l * 6 + j]
                    db[k * 6 + j] = s
            for i in range(3):
                dofs[2 * i] = 2 * tv[e, i]
                dofs[2 * i + 1] = 2 * tv[e, i] + 1
            for i in range(6):
                gi = dofs[i]
                if gi < skip:
                    continue
                for j in range(6):
                    gj = dofs[j]
                    if gi > gj:
                        continue
                    s = 0.0
                    for k in range(3):
                        s = s + bm[k * 6 + i] * db[k * 6 + j]
                    av[bw + gi - gj, gj - skip] += area * s
    return ab


def element_stress(nodes, tris, u, double lam, double mu):
    cdef const double[:, :] nv = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const long long[:, :] tv = np.ascontiguousarray(tris, dtype=np.int64)
    cdef const double[:] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t ne = tv.shape[0], e, i
    out = np.empty((ne, 3))
    cdef double[:, :] ov = out
    cdef double det, exx, eyy, gxy, ux, uy
    cdef double b[3]
    cdef double c[3]
    with nogil:
        for e in range(ne):
            _element(nv, tv, e, &det, b, c)
            exx = 0.0
            eyy = 0.0
            gxy = 0.0
            for i in range(3):
                ux = uv[2 * tv[e, i]]
                uy = uv[2 * tv[e, i] + 1]
                exx = exx + b[i] * ux
                eyy = eyy + c[i] * uy
                gxy = gxy + c[i] * ux + b[i] * uy
            exx = exx / det
            eyy = eyy / det
            gxy = gxy / det
            ov[e, 0] = (lam + 2 * mu) * exx + lam * eyy
            ov[e, 1] = lam * exx + (lam + 2 * mu) * eyy
            ov[e, 2] = mu * gxy
    return out


cdef inline double _ipow(double r, long n) noexcept nogil:
    cdef double out = 1.0
    while n > 0:
        if n & 1:
            out *= r
        r *= r
        n >>= 1
    return out


def weibull_sum(stress, areas, double sigma0, double m, Py_ssize_t n_angles):
    cdef const double[:, :] sv = np.ascontiguousarray(stress, dtype=np.float64)
    cdef const double[:] av = np.ascontiguousarray(areas, dtype=np.float64)
    cdef Py_ssize_t ne = sv.shape[0], e, k
    cc_arr = np.empty(n_angles)
    ss_arr = np.empty(n_angles)
    cs_arr = np.empty(n_angles)
    cdef double[:] cc = cc_arr
    cdef double[:] ss = ss_arr
    cdef double[:] cs = cs_arr
    cdef double theta, normal, acc, total = 0.0
    cdef double inv = 1.0 / sigma0
    # integer moduli (the usual case) avoid the general pow
    cdef bint integral = m == floor(m) and m <= 64.0
    cdef long mi = <long>m
    for k in range(n_angles):
        theta = 2.0 * M_PI * k / n_angles
        cc[k] = cos(theta) * cos(theta)
        ss[k] = sin(theta) * sin(theta)
        cs[k] = 2.0 * cos(theta) * sin(theta)
    with nogil:
        for e in range(ne):
            acc = 0.0
            for k in range(n_angles):
                normal = sv[e, 0] * cc[k] + sv[e, 1] * ss[k] + sv[e, 2] * cs[k]
                if normal > 0.0:
                    if integral:
                        acc = acc + _ipow(normal * inv, mi)
                    else:
                        acc = acc + pow(normal * inv, m)
            total = total + av[e] * (acc / n_angles)
    return total
