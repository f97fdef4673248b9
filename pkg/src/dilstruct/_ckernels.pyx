# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: graded nilpotent group arithmetic and the GH
correspondence search.  Mirrors dilstruct._pykernels."""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

cnp.import_array()

BACKEND = "compiled"


cdef inline void _bracket_apply(double[:, :, ::1] bracket, double* u, double* v,
                                double* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double c
    for k in range(n):
        out[k] = 0.0
    for i in range(n):
        if u[i] == 0.0:
            continue
        for j in range(n):
            if v[j] == 0.0:
                continue
            c = u[i] * v[j]
            for k in range(n):
                out[k] += bracket[i, j, k] * c


def carnot_mul(a, b, bracket, int step):
    """Truncated-BCH group product, steps 1..3, first-kind coordinates."""
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, :, ::1] bt = np.ascontiguousarray(bracket, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[16] ab
    cdef double[16] tmp
    cdef Py_ssize_t k
    if n > 16:
        raise ValueError("kernel supports dimension <= 16")
    for k in range(n):
        out[k] = av[k] + bv[k]
    if step >= 2:
        _bracket_apply(bt, &av[0], &bv[0], ab, n)
        for k in range(n):
            out[k] += 0.5 * ab[k]
        if step >= 3:
            _bracket_apply(bt, &av[0], ab, tmp, n)
            for k in range(n):
                out[k] += tmp[k] / 12.0
            _bracket_apply(bt, &bv[0], ab, tmp, n)
            for k in range(n):
                out[k] -= tmp[k] / 12.0
    return out_arr


def carnot_dil(double eps, a, deg):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef long[::1] dv = np.ascontiguousarray(deg, dtype=np.int64)
    cdef Py_ssize_t n = av.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = av[i] * pow(eps, <double> dv[i])
    return out_arr


def heis_mul(a, b):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    out_arr = np.empty(3, dtype=np.float64)
    cdef double[::1] out = out_arr
    out[0] = av[0] + bv[0]
    out[1] = av[1] + bv[1]
    out[2] = av[2] + bv[2] + 0.5 * (av[0] * bv[1] - av[1] * bv[0])
    return out_arr


def heis_inv(a):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    out_arr = np.empty(3, dtype=np.float64)
    cdef double[::1] out = out_arr
    out[0] = -av[0]
    out[1] = -av[1]
    out[2] = -av[2]
    return out_arr


def heis_dil(double eps, a):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    out_arr = np.empty(3, dtype=np.float64)
    cdef double[::1] out = out_arr
    out[0] = eps * av[0]
    out[1] = eps * av[1]
    out[2] = eps * eps * av[2]
    return out_arr


def heis_gauge(a):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double sq = av[0] * av[0] + av[1] * av[1]
    return pow(sq * sq + 16.0 * av[2] * av[2], 0.25)


def gh_search(dx, dy, double best0, int forced_i=-1, int forced_j=-1):
    """Branch-and-bound minimum accuracy over correspondences.

    Returns (value, masks) with masks[i] the Y-bitmask assigned to row i,
    or (best0, None) when nothing beats the seed bound.
    """
    cdef double[:, ::1] dxv = np.ascontiguousarray(dx, dtype=np.float64)
    cdef double[:, ::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef int n = dxv.shape[0]
    cdef int m = dyv.shape[0]
    cdef long full = (1 << m) - 1
    if n * m > 30 or m >= 31:
        raise ValueError("instance too large for exact search")

    order_rows = []
    cdef int i
    cdef long mask
    for i in range(n):
        row = []
        for mask in range(1, full + 1):
            if i == forced_i and not (mask >> forced_j) & 1:
                continue
            row.append(mask)
        row.sort(key=lambda mk: (_popcount(mk), _mask_diam(mk, dy)))
        order_rows.append(np.asarray(row, dtype=np.int64))

    masks = np.zeros(n, dtype=np.int64)
    best_masks = np.zeros(n, dtype=np.int64)
    cdef double[1] best
    best[0] = best0
    cdef long[::1] mv = masks
    cdef long[::1] bmv = best_masks
    found = [False]
    _rec(0, 0, 0.0, n, m, full, dxv, dyv, order_rows, mv, bmv, best, found)
    if not found[0]:
        return best[0], None
    return best[0], best_masks


def _popcount(long x):
    cdef int c = 0
    while x:
        c += x & 1
        x >>= 1
    return c


def _mask_diam(long mask, dy):
    cdef double c = 0.0
    js = [j for j in range(len(dy)) if (mask >> j) & 1]
    for a in js:
        for b in js:
            c = max(c, abs(dy[a][b]))
    return c


cdef void _rec(int i, long covered, double acc, int n, int m, long full,
               double[:, ::1] dx, double[:, ::1] dy, list order_rows,
               long[::1] masks, long[::1] best_masks, double* best,
               list found):
    cdef long mask, m2
    cdef int j, i2, j2, k
    cdef double new_acc, v
    if acc >= best[0]:
        return
    if i == n:
        if covered == full:
            best[0] = acc
            for k in range(n):
                best_masks[k] = masks[k]
            found[0] = True
        return
    cdef long[::1] row = order_rows[i]
    for k in range(row.shape[0]):
        mask = row[k]
        new_acc = acc
        for j in range(m):
            if not (mask >> j) & 1:
                continue
            for i2 in range(i + 1):
                m2 = mask if i2 == i else masks[i2]
                for j2 in range(m):
                    if not (m2 >> j2) & 1:
                        continue
                    v = fabs(dy[j, j2] - dx[i, i2])
                    if v > new_acc:
                        new_acc = v
        if new_acc >= best[0]:
            continue
        masks[i] = mask
        _rec(i + 1, covered | mask, new_acc, n, m, full, dx, dy,
             order_rows, masks, best_masks, best, found)
    masks[i] = 0
