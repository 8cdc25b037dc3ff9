# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: nearest-node scan, Voronoi chord bisection, Prim.

Same tie-breaking and bisection schedule as ``_pure.py``. Coordinates are
assumed whitened.
"""

from libc.math cimport INFINITY

import numpy as np


cdef inline double _sqdist(const double[:, ::1] nodes, Py_ssize_t k,
                           const double[::1] x, double best) noexcept nogil:
    cdef Py_ssize_t d, p = nodes.shape[1]
    cdef double acc = 0.0, t
    for d in range(p):
        t = nodes[k, d] - x[d]
        acc += t * t
        if acc > best:
            break
    return acc


def nearest(const double[:, ::1] nodes, const double[::1] x):
    cdef Py_ssize_t k, m = nodes.shape[0], best_k = 0
    cdef double best = INFINITY, dk
    with nogil:
        for k in range(m):
            dk = _sqdist(nodes, k, x, best)
            if dk < best:
                best = dk
                best_k = k
    return best_k


cdef bint _owned(const double[:, ::1] nodes, Py_ssize_t i,
                 const double[::1] x) noexcept nogil:
    cdef Py_ssize_t k, m = nodes.shape[0]
    cdef double di = _sqdist(nodes, i, x, INFINITY), dk
    for k in range(m):
        if k == i:
            continue
        dk = _sqdist(nodes, k, x, di)
        if dk < di or (dk == di and k < i):
            return False
    return True


def owned_by(const double[:, ::1] nodes, Py_ssize_t i, const double[::1] x):
    cdef bint res
    with nogil:
        res = _owned(nodes, i, x)
    return bool(res)


cdef double _bound(const double[:, ::1] nodes, Py_ssize_t i,
                   const double[::1] v, double sign, double l, double tol,
                   int max_iter, double[::1] buf) noexcept nogil:
    cdef Py_ssize_t d, p = nodes.shape[1]
    cdef double lo = 0.0, hi = l, mid
    cdef int it = 0
    for d in range(p):
        buf[d] = nodes[i, d] + sign * l * v[d]
    if _owned(nodes, i, buf):
        return l
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        for d in range(p):
            buf[d] = nodes[i, d] + sign * mid * v[d]
        if _owned(nodes, i, buf):
            lo = mid
        else:
            hi = mid
        it += 1
    return lo


def segment_bounds(const double[:, ::1] nodes, Py_ssize_t i,
                   const double[::1] v, double l, double tol, int max_iter):
    cdef double[::1] buf = np.empty(nodes.shape[1])
    cdef double a, b
    with nogil:
        b = _bound(nodes, i, v, 1.0, l, tol, max_iter, buf)
        a = _bound(nodes, i, v, -1.0, l, tol, max_iter, buf)
    return -a, b


def prim_mst(const double[:, ::1] cost):
    cdef Py_ssize_t m = cost.shape[0], step, k, j
    cdef double best, c
    key_arr = np.full(m, np.inf)
    parent_arr = np.full(m, -1, dtype=np.int64)
    tree_arr = np.zeros(m, dtype=np.uint8)
    edges_arr = np.empty((max(m - 1, 0), 2), dtype=np.int64)
    cdef double[::1] key = key_arr
    cdef long long[::1] parent = parent_arr
    cdef unsigned char[::1] in_tree = tree_arr
    cdef long long[:, ::1] edges = edges_arr
    with nogil:
        in_tree[0] = 1
        for k in range(1, m):
            key[k] = cost[0, k]
            parent[k] = 0
        for step in range(m - 1):
            best = INFINITY
            j = -1
            for k in range(m):
                if not in_tree[k] and (j < 0 or key[k] < best):
                    best = key[k]
                    j = k
            edges[step, 0] = parent[j]
            edges[step, 1] = j
            in_tree[j] = 1
            for k in range(m):
                if in_tree[k]:
                    continue
                c = cost[j, k]
                if c < key[k] or (c == key[k] and j < parent[k]):
                    key[k] = c
                    parent[k] = j
    return edges_arr
