# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_kernels_py`` for the contracts."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, INFINITY, isfinite
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

cnp.import_array()


def polish_roots(coeffs, roots):
    cdef double complex[:, ::1] c = np.ascontiguousarray(coeffs, dtype=np.complex128)
    out = np.array(roots, dtype=np.complex128, copy=True, order="C")
    cdef double complex[:, ::1] r = out
    cdef Py_ssize_t n = r.shape[0], k = r.shape[1], deg = c.shape[1] - 1
    cdef Py_ssize_t a, b, i
    cdef double complex t, p, dp, step
    for a in range(n):
        for b in range(k):
            t = r[a, b]
            p = 0
            dp = 0
            for i in range(deg, -1, -1):
                dp = dp * t + p
                p = p * t + c[a, i]
            if dp != 0:
                step = p / dp
                if abs(step) <= 1e-2 * (1.0 + abs(t)):
                    r[a, b] = t - step
    return out


def poly_eval(coeffs, t):
    cdef double complex[:, ::1] c = np.ascontiguousarray(coeffs, dtype=np.complex128)
    tt = np.ascontiguousarray(t, dtype=np.complex128)
    if tt.ndim == 1:
        tt = tt[:, None]
        squeeze = True
    else:
        squeeze = False
    cdef double complex[:, ::1] x = tt
    out = np.zeros((x.shape[0], x.shape[1]), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1], deg = c.shape[1] - 1
    cdef Py_ssize_t a, b, i
    cdef double complex acc, v
    for a in range(n):
        for b in range(k):
            v = x[a, b]
            acc = 0
            for i in range(deg, -1, -1):
                acc = acc * v + c[a, i]
            o[a, b] = acc
    return out[:, 0] if squeeze else out


def polygon_test(poly, pts):
    cdef double complex[::1] pg = np.ascontiguousarray(poly, dtype=np.complex128)
    cdef double complex[::1] q = np.ascontiguousarray(pts, dtype=np.complex128)
    cdef Py_ssize_t m = pg.shape[0], n = q.shape[0]
    inside_arr = np.zeros(n, dtype=np.bool_)
    dist_arr = np.empty(n, dtype=np.float64)
    cdef cnp.npy_bool[::1] inside = inside_arr
    cdef double[::1] dist = dist_arr
    cdef Py_ssize_t i, j
    cdef double px, py, ax, ay, bx, by, ex, ey, ee, t, dx, dy, d2, best, xint
    cdef bint inn
    for i in range(n):
        px = q[i].real
        py = q[i].imag
        if not (isfinite(px) and isfinite(py)):
            inside[i] = False
            dist[i] = INFINITY
            continue
        inn = False
        best = INFINITY
        for j in range(m):
            ax = pg[j].real
            ay = pg[j].imag
            if j + 1 < m:
                bx = pg[j + 1].real
                by = pg[j + 1].imag
            else:
                bx = pg[0].real
                by = pg[0].imag
            if (ay > py) != (by > py):
                xint = ax + (py - ay) * (bx - ax) / (by - ay)
                if px < xint:
                    inn = not inn
            ex = bx - ax
            ey = by - ay
            ee = ex * ex + ey * ey
            if ee > 0:
                t = ((px - ax) * ex + (py - ay) * ey) / ee
                if t < 0:
                    t = 0
                elif t > 1:
                    t = 1
            else:
                t = 0
            dx = px - (ax + t * ex)
            dy = py - (ay + t * ey)
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
        inside[i] = inn
        dist[i] = sqrt(best)
    return inside_arr, dist_arr


cdef inline long long _cell_key(long long x, long long y, long long z):
    return ((x & 0x1FFFFF) << 42) | ((y & 0x1FFFFF) << 21) | (z & 0x1FFFFF)


def greedy_separated(coords, double eps):
    cdef double[:, :, ::1] c = np.ascontiguousarray(coords, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], depth = c.shape[1]
    cdef double lim2 = 4.0 * eps * eps
    cdef double cell = 2.0 * eps
    cdef unordered_map[long long, vector[int]] buckets
    cdef vector[int] chosen
    cdef Py_ssize_t idx, s, i
    cdef long long kx, ky, kz, key
    cdef int ox, oy, oz, other
    cdef bint close, allclose
    cdef double dx, dy, dz
    for idx in range(n):
        kx = <long long>floor(c[idx, 0, 0] / cell)
        ky = <long long>floor(c[idx, 0, 1] / cell)
        kz = <long long>floor(c[idx, 0, 2] / cell)
        close = False
        for ox in range(-1, 2):
            if close:
                break
            for oy in range(-1, 2):
                if close:
                    break
                for oz in range(-1, 2):
                    key = _cell_key(kx + ox, ky + oy, kz + oz)
                    if buckets.count(key) == 0:
                        continue
                    for s in range(<Py_ssize_t>buckets[key].size()):
                        other = buckets[key][s]
                        allclose = True
                        for i in range(depth):
                            dx = c[idx, i, 0] - c[other, i, 0]
                            dy = c[idx, i, 1] - c[other, i, 1]
                            dz = c[idx, i, 2] - c[other, i, 2]
                            if dx * dx + dy * dy + dz * dz >= lim2:
                                allclose = False
                                break
                        if allclose:
                            close = True
                            break
                    if close:
                        break
        if not close:
            chosen.push_back(<int>idx)
            buckets[_cell_key(kx, ky, kz)].push_back(<int>idx)
    return [chosen[s] for s in range(<Py_ssize_t>chosen.size())]
