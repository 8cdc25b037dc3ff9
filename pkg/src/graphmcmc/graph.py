"""Spanning-tree graph over approximate posterior samples.

Nodes carry a location (an approximate sample) and a cached log density.
Edges come from a minimum spanning tree whose costs favour long edges
between nodes of similar density. All geometry is done in whitened
coordinates, so the Mahalanobis metric reduces to Euclidean there.
"""

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.spatial.distance import cdist, pdist

from . import _backend

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Metric:
    """Euclidean, or Mahalanobis ``sqrt((a-b)' S^{-1} (a-b))``."""

    kind: str = "euclidean"
    scale: np.ndarray | None = None
    _chol: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def euclidean(cls):
        return cls("euclidean")

    @classmethod
    def mahalanobis(cls, scale):
        scale = np.asarray(scale, dtype=float)
        L = cholesky(scale, lower=True)
        return cls("mahalanobis", scale, L)

    @classmethod
    def from_samples(cls, beta, inflation=1e-6):
        """Mahalanobis with the sample covariance of ``beta`` (diagonal
        inflated); falls back to Euclidean if that is not positive definite."""
        beta = np.atleast_2d(beta)
        if beta.shape[0] < 2:
            logger.warning("fewer than 2 samples; using Euclidean metric")
            return cls.euclidean()
        S = np.atleast_2d(np.cov(beta, rowvar=False))
        S = S + inflation * np.eye(S.shape[0])
        try:
            return cls.mahalanobis(S)
        except np.linalg.LinAlgError:
            logger.warning("sample covariance is singular; falling back to Euclidean metric")
            return cls.euclidean()

    def whiten(self, x):
        """Map points (rows) to coordinates where this metric is Euclidean."""
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return np.ascontiguousarray(x)
        if x.ndim == 1:
            return solve_triangular(self._chol, x, lower=True)
        return np.ascontiguousarray(solve_triangular(self._chol, x.T, lower=True).T)

    def unwhiten(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "euclidean":
            return w
        return self._chol @ w if w.ndim == 1 else w @ self._chol.T

    def distance(self, a, b):
        d = self.whiten(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        return float(np.sqrt(d @ d))


def edge_cost(log_gap, distance, kappa):
    """``kappa / (1 + distance)`` when ``|log_gap| < kappa``, else ``|log_gap|``.

    Works elementwise on arrays.
    """
    gap = np.abs(log_gap)
    out = np.where(gap < kappa, kappa / (1.0 + np.asarray(distance, dtype=float)), gap)
    return out if out.ndim else float(out)


def cost_matrix(white, log_densities, kappa, distances=None):
    if distances is None:
        distances = cdist(white, white)
    gap = log_densities[:, None] - log_densities[None, :]
    return np.ascontiguousarray(edge_cost(gap, distances, kappa))


def prim_mst(cost):
    """Prim's algorithm from node 0; returns ``(m-1, 2)`` edges."""
    cost = np.ascontiguousarray(cost, dtype=float)
    if cost.shape[0] < 2:
        return np.empty((0, 2), dtype=np.int64)
    return np.asarray(_backend.prim_mst(cost), dtype=np.int64)


def kruskal_mst(cost):
    """Kruskal's algorithm with union-find; ties broken by ``(i, j)`` order."""
    m = cost.shape[0]
    iu, ju = np.triu_indices(m, k=1)
    order = np.lexsort((ju, iu, cost[iu, ju]))
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    edges = []
    for k in order:
        a, b = find(iu[k]), find(ju[k])
        if a != b:
            parent[a] = b
            edges.append((iu[k], ju[k]))
            if len(edges) == m - 1:
                break
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def tree_cost(cost, edges):
    edges = np.asarray(edges)
    if edges.size == 0:
        return 0.0
    return float(cost[edges[:, 0], edges[:, 1]].sum())


def _adjacency(m, edges):
    adj = [[] for _ in range(m)]
    for a, b in edges:
        adj[a].append(int(b))
        adj[b].append(int(a))
    return [np.array(sorted(n), dtype=np.int64) for n in adj]


def _bfs(adjacency, src, radius=None):
    """Hop distances from ``src``; stops expanding past ``radius`` if given."""
    dist = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        du = dist[u]
        if radius is not None and du >= radius:
            continue
        for w in adjacency[u]:
            w = int(w)
            if w not in dist:
                dist[w] = du + 1
                queue.append(w)
    return dist


def _balls(adjacency, r):
    return [np.array(sorted(_bfs(adjacency, j, r)), dtype=np.int64) for j in range(len(adjacency))]


class SampleGraph:
    """Immutable spanning tree over approximate samples.

    Attributes
    ----------
    nodes : (m, p) array
        Approximate samples in the original coordinates.
    white : (m, p) array
        The same samples in whitened coordinates.
    log_densities : (m,) array
        Target log kernel at every node.
    edges : (m-1, 2) int array
    kappa, r : float, int
        Edge-cost threshold and ball radius.
    """

    def __init__(self, nodes, log_densities, metric, edges, kappa, r, costs=None):
        self.nodes = np.ascontiguousarray(np.atleast_2d(nodes), dtype=float)
        self.metric = metric
        self.white = np.ascontiguousarray(metric.whiten(self.nodes))
        self.log_densities = np.asarray(log_densities, dtype=float)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.kappa = float(kappa)
        self.r = int(r)
        self.m, self.p = self.nodes.shape
        if len(self.edges) != self.m - 1:
            raise ValueError("a spanning tree needs exactly m-1 edges")
        self.adjacency = _adjacency(self.m, self.edges)
        self.edge_costs = costs
        self.balls = _balls(self.adjacency, self.r)
        self.ball_sizes = np.array([len(b) for b in self.balls], dtype=np.int64)
        for arr in (self.nodes, self.white, self.log_densities, self.edges, self.ball_sizes):
            arr.setflags(write=False)

    def nearest(self, theta):
        return nearest_node(self, theta)

    def with_radius(self, r):
        return SampleGraph(self.nodes, self.log_densities, self.metric, self.edges,
                           self.kappa, r, self.edge_costs)

    def median_pairwise_distance(self):
        if self.m < 2:
            return 1.0
        return float(np.median(pdist(self.white)))

    def default_truncation(self):
        """Twice the median pairwise distance among the nodes."""
        return 2.0 * self.median_pairwise_distance()

    def is_spanning_tree(self):
        return len(self.edges) == self.m - 1 and len(_bfs(self.adjacency, 0)) == self.m


def node_log_densities(beta, target):
    logd = np.asarray(target.log_kernel_many(beta), dtype=float)
    bad = np.flatnonzero(~np.isfinite(logd))
    if bad.size:
        raise ValueError(f"approximate sample {bad[0]} has non-finite log density ({logd[bad[0]]})")
    return logd


def build_mst(beta, target, metric=None, kappa=1.0, r=3, log_densities=None, algorithm="prim"):
    """Build the minimum spanning tree graph over ``beta`` (rows are samples)."""
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    if beta.shape[0] < 2:
        raise ValueError("need at least 2 approximate samples to build a graph")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    metric = metric or Metric.euclidean()
    if log_densities is None:
        log_densities = node_log_densities(beta, target)
    white = metric.whiten(beta)
    cost = cost_matrix(white, log_densities, kappa)
    if algorithm == "prim":
        edges = prim_mst(cost)
    elif algorithm == "kruskal":
        edges = kruskal_mst(cost)
    else:
        raise ValueError(f"unknown MST algorithm {algorithm!r}")
    costs = cost[edges[:, 0], edges[:, 1]]
    return SampleGraph(beta, log_densities, metric, edges, kappa, r, costs)


def graph_distance(graph, i, j):
    """Number of edges on the tree path between ``i`` and ``j``."""
    if i == j:
        return 0
    return _bfs(graph.adjacency, int(i))[int(j)]


def ball(graph, j, r=None):
    """Sorted node indices within ``r`` hops of ``j`` (``j`` included)."""
    if r is None or r == graph.r:
        return graph.balls[int(j)]
    if r < 0:
        raise ValueError("radius must be nonnegative")
    return np.array(sorted(_bfs(graph.adjacency, int(j), int(r))), dtype=np.int64)


def nearest_node(graph, theta):
    """Exact linear scan under the graph metric; ties go to the lowest index."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (graph.p,):
        raise ValueError(f"expected a point of dimension {graph.p}")
    return int(_backend.nearest(graph.white, np.ascontiguousarray(graph.metric.whiten(theta))))


def _esjd_from_parts(sqdist, log_densities, balls):
    log_size = np.log([len(b) for b in balls])
    score = log_densities - log_size
    total = 0.0
    for j, b in enumerate(balls):
        ratio = np.exp(np.minimum(0.0, score[b] - score[j]))
        total += np.sum(ratio * sqdist[j, b]) / len(b)
    return total / len(balls)


def esjd_estimate(beta, target, metric=None, kappa=1.0, r=3, log_densities=None):
    """Graph-walk estimate of the expected squared jumped distance."""
    graph = build_mst(beta, target, metric, kappa, r, log_densities)
    sqdist = cdist(graph.white, graph.white, "sqeuclidean")
    return float(_esjd_from_parts(sqdist, graph.log_densities, graph.balls))


def tune_kappa_r(beta, target, metric=None, kappa_grid=(1.0,), r_grid=(3,), log_densities=None):
    """Grid search for ``(kappa, r)`` maximizing the ESJD estimate.

    Returns ``(kappa, r, table)`` where ``table`` is a list of
    ``(kappa, r, esjd)`` rows in grid order. Ties go to the smallest kappa,
    then the smallest r.
    """
    kappa_grid = sorted(float(k) for k in kappa_grid)
    r_grid = sorted(int(r) for r in r_grid)
    if not kappa_grid or not r_grid:
        raise ValueError("kappa and r grids must be nonempty")
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    metric = metric or Metric.euclidean()
    if log_densities is None:
        log_densities = node_log_densities(beta, target)
    white = metric.whiten(beta)
    dist = cdist(white, white)
    sqdist = dist ** 2
    table = []
    best = (-np.inf, None, None)
    for kappa in kappa_grid:
        edges = prim_mst(cost_matrix(white, log_densities, kappa, dist))
        adj = _adjacency(len(beta), edges)
        for r in r_grid:
            value = float(_esjd_from_parts(sqdist, log_densities, _balls(adj, r)))
            table.append((kappa, r, value))
            if value > best[0]:
                best = (value, kappa, r)
    return best[1], best[2], table


def load_samples_csv(path):
    """Read an ``m x p`` sample matrix; a non-numeric first row is taken as a header."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(x) for x in first.strip().split(",")]
        skip = 0
    except ValueError:
        skip = 1
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2))


def write_edges_csv(graph, path):
    costs = graph.edge_costs if graph.edge_costs is not None else np.full(len(graph.edges), np.nan)
    with open(path, "w") as fh:
        fh.write("i,j,cost\n")
        for (a, b), c in zip(graph.edges, costs):
            fh.write(f"{a},{b},{c:.17g}\n")
