# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: P1 element integrals and cyclic soft-threshold sweeps."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def p1_triplets(const double[:, ::1] nodes, const long[:, ::1] tris):
    """Local P1 stiffness and consistent mass entries for every triangle.

    Returns ``rows, cols, k_vals, m_vals, areas`` with 9 entries per element.
    """
    cdef Py_ssize_t ne = tris.shape[0]
    cdef Py_ssize_t e, a, b, k
    cdef double x0, y0, x1, y1, x2, y2, det, area
    cdef double bx[3]
    cdef double by[3]
    rows = np.empty(9 * ne, dtype=np.int64)
    cols = np.empty(9 * ne, dtype=np.int64)
    kv = np.empty(9 * ne, dtype=np.float64)
    mv = np.empty(9 * ne, dtype=np.float64)
    areas = np.empty(ne, dtype=np.float64)
    cdef long[::1] r = rows
    cdef long[::1] c = cols
    cdef double[::1] K = kv
    cdef double[::1] M = mv
    cdef double[::1] A = areas
    for e in range(ne):
        x0 = nodes[tris[e, 0], 0]; y0 = nodes[tris[e, 0], 1]
        x1 = nodes[tris[e, 1], 0]; y1 = nodes[tris[e, 1], 1]
        x2 = nodes[tris[e, 2], 0]; y2 = nodes[tris[e, 2], 1]
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        area = 0.5 * fabs(det)
        A[e] = area
        if area == 0.0:
            continue
        # gradients of barycentric coordinates times det
        bx[0] = y1 - y2; bx[1] = y2 - y0; bx[2] = y0 - y1
        by[0] = x2 - x1; by[1] = x0 - x2; by[2] = x1 - x0
        k = 9 * e
        for a in range(3):
            for b in range(3):
                r[k] = tris[e, a]
                c[k] = tris[e, b]
                K[k] = (bx[a] * bx[b] + by[a] * by[b]) / (4.0 * area)
                M[k] = area / 6.0 if a == b else area / 12.0
                k += 1
    return rows, cols, kv, mv, areas


def cd_sweep(const double[:, ::1] A, const double[::1] c,
             const double[::1] tau, double[::1] x):
    """One cyclic coordinate-descent sweep on 0.5 x'Ax - c'x + sum tau|x|.

    Updates ``x`` in place and returns the largest coordinate change.
    """
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j
    cdef double s, xi, new, change, dmax = 0.0
    for i in range(n):
        s = c[i]
        for j in range(n):
            if j != i:
                s -= A[i, j] * x[j]
        if s > tau[i]:
            new = (s - tau[i]) / A[i, i]
        elif s < -tau[i]:
            new = (s + tau[i]) / A[i, i]
        else:
            new = 0.0
        xi = x[i]
        change = fabs(new - xi)
        if change > dmax:
            dmax = change
        x[i] = new
    return dmax
