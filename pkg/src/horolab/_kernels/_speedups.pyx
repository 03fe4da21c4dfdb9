# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Cython twins of the hot kernels in ``_pure``.

The module must stay bit-compatible with the pure-numpy backend: identical
operation order everywhere, and the build disables FP contraction.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt, INFINITY

cnp.import_array()

BACKEND = "native"


def expand_reduced_words(cnp.ndarray[cnp.float64_t, ndim=4] frontier,
                         cnp.ndarray[cnp.int32_t, ndim=1] last,
                         cnp.ndarray[cnp.float64_t, ndim=4] gens,
                         cnp.ndarray[cnp.int32_t, ndim=1] inv_of):
    cdef Py_ssize_t m = frontier.shape[0]
    cdef Py_ssize_t n_f = frontier.shape[1]
    cdef Py_ssize_t g_count = gens.shape[0]
    cdef Py_ssize_t i, g, f, n_out, pos
    n_out = 0
    for i in range(m):
        for g in range(g_count):
            if last[i] != inv_of[g]:
                n_out += 1
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out = np.empty(
        (n_out, n_f, 2, 2), dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] letter = np.empty(
        n_out, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] parent = np.empty(
        n_out, dtype=np.int64)
    cdef double a00, a01, a10, a11, b00, b01, b10, b11
    pos = 0
    for i in range(m):
        for g in range(g_count):
            if last[i] == inv_of[g]:
                continue
            for f in range(n_f):
                a00 = frontier[i, f, 0, 0]
                a01 = frontier[i, f, 0, 1]
                a10 = frontier[i, f, 1, 0]
                a11 = frontier[i, f, 1, 1]
                b00 = gens[g, f, 0, 0]
                b01 = gens[g, f, 0, 1]
                b10 = gens[g, f, 1, 0]
                b11 = gens[g, f, 1, 1]
                out[pos, f, 0, 0] = a00 * b00 + a01 * b10
                out[pos, f, 0, 1] = a00 * b01 + a01 * b11
                out[pos, f, 1, 0] = a10 * b00 + a11 * b10
                out[pos, f, 1, 1] = a10 * b01 + a11 * b11
            letter[pos] = <cnp.int32_t> g
            parent[pos] = i
            pos += 1
    return out, letter, parent


cdef bint _inside_one(cnp.float64_t[:, ::1] points, Py_ssize_t p,
                      cnp.float64_t[:, ::1] centers, Py_ssize_t j,
                      cnp.float64_t[:, ::1] thr2,
                      cnp.int64_t[::1] axis_start) nogil:
    cdef Py_ssize_t f, ax
    cdef double dist2, diff
    for f in range(thr2.shape[1]):
        dist2 = 0.0
        for ax in range(axis_start[f], axis_start[f + 1]):
            diff = points[p, ax] - centers[j, ax]
            dist2 += diff * diff
        if not dist2 < thr2[j, f]:
            return 0
    return 1


def greedy_cover(cnp.ndarray[cnp.float64_t, ndim=2] centers,
                 cnp.ndarray[cnp.float64_t, ndim=2] thr2,
                 cnp.ndarray[cnp.int64_t, ndim=1] axis_start,
                 cnp.ndarray[cnp.int64_t, ndim=1] order):
    cdef Py_ssize_t n = centers.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] covered = np.zeros(n, dtype=np.uint8)
    cdef cnp.float64_t[:, ::1] c_view = np.ascontiguousarray(centers)
    cdef cnp.float64_t[:, ::1] t_view = np.ascontiguousarray(thr2)
    cdef cnp.int64_t[::1] ax_view = np.ascontiguousarray(axis_start)
    cdef list selected = []
    cdef Py_ssize_t pos, idx, q
    for pos in range(order.shape[0]):
        idx = order[pos]
        if covered[idx]:
            continue
        selected.append(idx)
        for q in range(n):
            if not covered[q]:
                if _inside_one(c_view, q, c_view, idx, t_view, ax_view):
                    covered[q] = 1
    return np.asarray(selected, dtype=np.int64)


def containment_counts(cnp.ndarray[cnp.float64_t, ndim=2] points,
                       cnp.ndarray[cnp.float64_t, ndim=2] centers,
                       cnp.ndarray[cnp.float64_t, ndim=2] thr2,
                       cnp.ndarray[cnp.int64_t, ndim=1] axis_start):
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t n = centers.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(m, dtype=np.int64)
    cdef cnp.float64_t[:, ::1] p_view = np.ascontiguousarray(points)
    cdef cnp.float64_t[:, ::1] c_view = np.ascontiguousarray(centers)
    cdef cnp.float64_t[:, ::1] t_view = np.ascontiguousarray(thr2)
    cdef cnp.int64_t[::1] ax_view = np.ascontiguousarray(axis_start)
    cdef Py_ssize_t p, j
    for j in range(n):
        for p in range(m):
            if _inside_one(p_view, p, c_view, j, t_view, ax_view):
                counts[p] += 1
    return counts


def walk_stats(cnp.ndarray[cnp.float64_t, ndim=2] inc,
               cnp.ndarray[cnp.float64_t, ndim=1] vhat,
               double rho, Py_ssize_t burn,
               cnp.ndarray[cnp.int64_t, ndim=1] checkpoints):
    cdef Py_ssize_t n = inc.shape[0]
    cdef Py_ssize_t r = inc.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] maxes = np.empty(
        checkpoints.shape[0], dtype=np.float64)
    cdef double[8] u
    cdef double[8] q
    cdef Py_ssize_t step, j, ck
    cdef double proj, qn2, qn, running, min_late
    cdef long count = 0
    if r > 8:
        raise ValueError("walk_stats supports at most 8 components")
    for j in range(r):
        u[j] = 0.0
    running = 0.0
    min_late = INFINITY
    ck = 0
    for step in range(n):
        for j in range(r):
            u[j] = u[j] + inc[step, j]
        proj = 0.0
        for j in range(r):
            proj += u[j] * vhat[j]
        qn2 = 0.0
        for j in range(r):
            q[j] = u[j] - proj * vhat[j]
            qn2 += q[j] * q[j]
        qn = sqrt(qn2)
        if qn > running:
            running = qn
        if step + 1 > burn:
            if qn <= rho:
                count += 1
            if qn < min_late:
                min_late = qn
        while ck < checkpoints.shape[0] and checkpoints[ck] == step + 1:
            maxes[ck] = running
            ck += 1
    return int(count), float(min_late), maxes


def displacement_grid(cnp.ndarray[cnp.float64_t, ndim=4] h,
                      cnp.ndarray[cnp.float64_t, ndim=1] v,
                      cnp.ndarray[cnp.float64_t, ndim=1] ts):
    cdef Py_ssize_t w = h.shape[0]
    cdef Py_ssize_t n_f = h.shape[1]
    cdef Py_ssize_t n_t = ts.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_t, dtype=np.float64)
    cdef Py_ssize_t k, i, f
    cdef double e, off, dp, dm, d, word_d, best, t, s
    for k in range(n_t):
        t = ts[k]
        best = INFINITY
        for i in range(w):
            word_d = 0.0
            for f in range(n_f):
                e = exp(t * v[f])
                s = fabs(h[i, f, 0, 1] / e)
                off = fabs(h[i, f, 1, 0] * e)
                if s > off:
                    off = s
                dp = fabs(h[i, f, 0, 0] - 1.0)
                s = fabs(h[i, f, 1, 1] - 1.0)
                if s > dp:
                    dp = s
                dm = fabs(h[i, f, 0, 0] + 1.0)
                s = fabs(h[i, f, 1, 1] + 1.0)
                if s > dm:
                    dm = s
                d = dp if dp < dm else dm
                if off > d:
                    d = off
                if d > word_d:
                    word_d = d
            if word_d < best:
                best = word_d
        out[k] = best
    return out
