# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trilinear interpolation kernels (see ``_kernels_py`` for the reference version)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def trilinear(const double[:, :, :, ::1] values, double lo, double h, const double[:, ::1] pts):
    """Interpolate an (n, n, n, C) node array at points (P, 3); zero outside [lo, lo + (n-1)h]^3."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t ncomp = values.shape[3]
    cdef Py_ssize_t npts = pts.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.zeros((npts, ncomp), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double hi = lo + (n - 1) * h
    cdef double fx, fy, fz, tx, ty, tz, w
    cdef double x, y, z
    cdef Py_ssize_t p, c, i, j, k
    with nogil:
        for p in range(npts):
            x = pts[p, 0]
            y = pts[p, 1]
            z = pts[p, 2]
            if x < lo or x > hi or y < lo or y > hi or z < lo or z > hi:
                continue
            fx = (x - lo) / h
            fy = (y - lo) / h
            fz = (z - lo) / h
            i = <Py_ssize_t>floor(fx)
            j = <Py_ssize_t>floor(fy)
            k = <Py_ssize_t>floor(fz)
            if i > n - 2:
                i = n - 2
            if j > n - 2:
                j = n - 2
            if k > n - 2:
                k = n - 2
            tx = fx - i
            ty = fy - j
            tz = fz - k
            for c in range(ncomp):
                w = ((1 - tx) * (1 - ty) * (1 - tz) * values[i, j, k, c]
                     + tx * (1 - ty) * (1 - tz) * values[i + 1, j, k, c]
                     + (1 - tx) * ty * (1 - tz) * values[i, j + 1, k, c]
                     + tx * ty * (1 - tz) * values[i + 1, j + 1, k, c]
                     + (1 - tx) * (1 - ty) * tz * values[i, j, k + 1, c]
                     + tx * (1 - ty) * tz * values[i + 1, j, k + 1, c]
                     + (1 - tx) * ty * tz * values[i, j + 1, k + 1, c]
                     + tx * ty * tz * values[i + 1, j + 1, k + 1, c])
                out[p, c] = w
    return out_arr


def rotate_pullback(const double[:, :, :, ::1] values, double lo, double h, double alpha):
    """Return g^T V(g x) at every node for the rotation g by ``alpha`` about the x3-axis."""
    cdef Py_ssize_t n = values.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out_arr = np.zeros((n, n, n, 3), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef double ca = np.cos(alpha)
    cdef double sa = np.sin(alpha)
    cdef double hi = lo + (n - 1) * h
    cdef double x1, x2, x3, y1, y2, fx, fy, fz, tx, ty, tz
    cdef double v[3]
    cdef Py_ssize_t a, b, k, i, j, kk, c
    with nogil:
        for a in range(n):
            x1 = lo + a * h
            for b in range(n):
                x2 = lo + b * h
                y1 = ca * x1 - sa * x2
                y2 = sa * x1 + ca * x2
                if y1 < lo or y1 > hi or y2 < lo or y2 > hi:
                    continue
                fx = (y1 - lo) / h
                fy = (y2 - lo) / h
                i = <Py_ssize_t>floor(fx)
                j = <Py_ssize_t>floor(fy)
                if i > n - 2:
                    i = n - 2
                if j > n - 2:
                    j = n - 2
                tx = fx - i
                ty = fy - j
                for k in range(n):
                    for c in range(3):
                        v[c] = ((1 - tx) * (1 - ty) * values[i, j, k, c]
                                + tx * (1 - ty) * values[i + 1, j, k, c]
                                + (1 - tx) * ty * values[i, j + 1, k, c]
                                + tx * ty * values[i + 1, j + 1, k, c])
                    out[a, b, k, 0] = ca * v[0] + sa * v[1]
                    out[a, b, k, 1] = -sa * v[0] + ca * v[1]
                    out[a, b, k, 2] = v[2]
    return out_arr
