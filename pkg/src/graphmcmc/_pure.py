"""Pure numpy implementations of the hot kernels.

These mirror ``_core.pyx`` exactly (same tie-breaking, same bisection
schedule) and are used whenever the compiled extension is unavailable.
All geometry here is Euclidean: callers whiten coordinates first.
"""

import numpy as np


def nearest(nodes, x):
    """Index of the row of ``nodes`` closest to ``x``; ties go to the lowest index."""
    d = np.einsum("ij,ij->i", nodes - x, nodes - x)
    return int(np.argmin(d))


def owned_by(nodes, i, x):
    """True iff ``nearest(nodes, x) == i``."""
    diff = nodes - x
    d = np.einsum("ij,ij->i", diff, diff)
    di = d[i]
    if np.any(d[:i] <= di):
        return False
    return not np.any(d[i + 1:] < di)


def _bound(nodes, i, v, sign, l, tol, max_iter):
    base = nodes[i]
    if owned_by(nodes, i, base + sign * l * v):
        return l
    lo, hi = 0.0, l
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if owned_by(nodes, i, base + sign * mid * v):
            lo = mid
        else:
            hi = mid
        it += 1
    return lo


def segment_bounds(nodes, i, v, l, tol, max_iter):
    """Bisection for the Voronoi-cell chord of node ``i`` along ``v``.

    Returns ``(a, b)`` with ``-l <= a <= 0 <= b <= l``; each endpoint is the
    inner end of the final bisection bracket, so every point strictly
    between them projects to ``i``.
    """
    b = _bound(nodes, i, v, 1.0, l, tol, max_iter)
    a = _bound(nodes, i, v, -1.0, l, tol, max_iter)
    return -a, b


def prim_mst(cost):
    """Prim's algorithm on a dense symmetric cost matrix, starting from node 0.

    Ties in the selected key go to the lowest node index; ties in the parent
    update go to the lowest parent index. Returns an ``(m - 1, 2)`` int array
    of ``(parent, child)`` edges in insertion order.
    """
    m = cost.shape[0]
    in_tree = np.zeros(m, dtype=bool)
    key = np.full(m, np.inf)
    parent = np.full(m, -1, dtype=np.int64)
    in_tree[0] = True
    key[1:] = cost[0, 1:]
    parent[1:] = 0
    edges = np.empty((m - 1, 2), dtype=np.int64)
    for step in range(m - 1):
        masked = np.where(in_tree, np.inf, key)
        j = int(np.argmin(masked))
        edges[step] = (parent[j], j)
        in_tree[j] = True
        c = cost[j]
        upd = ~in_tree & ((c < key) | ((c == key) & (j < parent)))
        key[upd] = c[upd]
        parent[upd] = j
    return edges
