"""Graph-jump Metropolis-Hastings kernel.

From the current point: project to the nearest node ``j``, pick a node ``i``
near ``j`` on the graph, then draw the proposal uniformly on the chord of
``i``'s Voronoi cell that passes through ``beta_i`` parallel to
``theta - beta_j`` (truncated at length ``l`` on each side).

The proposal lives on a line through ``beta_i`` whose direction is fixed by
the current point, so the forward and reverse moves are densities with
respect to polar coordinates around different centres. Detailed balance then
needs the radial Jacobian ``(|xi| / ||theta - beta_j||)^(p-1)`` in the
acceptance ratio; ``radial_jacobian=False`` drops it (not invariant for
``p > 1``, kept for comparison runs only).
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _backend
from .graph import ball, nearest_node

DEGENERATE_RADIUS = 1e-12


@dataclass
class JumpProposal:
    """Transcript of one graph-jump attempt.

    ``direction`` is in original coordinates (unit length in the metric).
    ``forward`` is the chord ``(a_i, b_i)`` at the proposed node, ``reverse``
    the chord ``(a_j, b_j)`` at the source node, both along ``direction``.
    """

    source: int
    node: int
    direction: np.ndarray
    forward: tuple
    reverse: tuple
    xi: float
    radius: float
    theta_star: np.ndarray
    log_target_star: float
    log_accept_ratio: float
    log_jacobian: float = 0.0
    accepted: bool = False
    reason: str = ""

    @property
    def accept_prob(self):
        if self.log_accept_ratio >= 0:
            return 1.0
        return math.exp(self.log_accept_ratio)

    def to_record(self):
        rec = asdict(self)
        rec["direction"] = self.direction.tolist()
        rec["theta_star"] = self.theta_star.tolist()
        rec["forward"] = list(self.forward)
        rec["reverse"] = list(self.reverse)
        return rec

    def to_json(self):
        return json.dumps(self.to_record(), allow_nan=True)


def random_unit_vector(p, rng):
    v = rng.standard_normal(p)
    return v / np.linalg.norm(v)


def direction_vector(theta, beta_j, rng=None, metric=None):
    """Unit vector from ``beta_j`` towards ``theta`` (in the metric's norm).

    When the two points coincide a uniformly random direction is returned.
    """
    diff = np.asarray(theta, dtype=float) - np.asarray(beta_j, dtype=float)
    if metric is None:
        norm = np.linalg.norm(diff)
        if norm < DEGENERATE_RADIUS:
            return random_unit_vector(diff.size, np.random.default_rng(rng))
        return diff / norm
    w = metric.whiten(diff)
    norm = np.linalg.norm(w)
    if norm < DEGENERATE_RADIUS:
        return metric.unwhiten(random_unit_vector(diff.size, np.random.default_rng(rng)))
    return diff / norm


def segment_bounds(graph, i, v, l, tol=None, max_iter=200):
    """Chord ``(a, b)`` of node ``i``'s Voronoi cell along ``v``, clipped to
    ``[-l, l]`` and located by bisection to absolute tolerance ``tol``.

    ``v`` is in original coordinates. Raises if ``beta_i`` does not project
    to ``i`` (duplicate nodes, for instance).
    """
    if l <= 0:
        raise ValueError("truncation length must be positive")
    tol = 1e-8 * l if tol is None else tol
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if not _backend.owned_by(graph.white, int(i), graph.white[int(i)]):
        raise ValueError(f"node {i} does not project to itself; graph and metric are inconsistent")
    u = np.ascontiguousarray(graph.metric.whiten(np.asarray(v, dtype=float)))
    return _backend.segment_bounds(graph.white, int(i), u, float(l), float(tol), int(max_iter))


class GraphJump:
    """Graph-jump kernel bound to a graph and a target.

    Parameters
    ----------
    graph : SampleGraph
    target : TargetModel
    l : float, optional
        Chord truncation. Defaults to twice the median pairwise node distance.
    tol : float, optional
        Bisection tolerance, default ``1e-8 * l``.
    walk_matrix : (m, m) array, optional
        Row-stochastic node transition matrix. When given, the next node is
        drawn from row ``j`` instead of uniformly from the ball.
    radial_jacobian : bool
        Include the polar-coordinate Jacobian in the acceptance ratio.
    """

    def __init__(self, graph, target, l=None, tol=None, max_iter=200,
                 walk_matrix=None, radial_jacobian=True):
        if target.dim != graph.p:
            raise ValueError("graph and target dimensions differ")
        self.graph = graph
        self.target = target
        self.l = float(graph.default_truncation() if l is None else l)
        if self.l <= 0:
            raise ValueError("truncation length must be positive")
        self.tol = 1e-8 * self.l if tol is None else float(tol)
        self.max_iter = int(max_iter)
        self.radial_jacobian = bool(radial_jacobian)
        if walk_matrix is not None:
            walk_matrix = np.asarray(walk_matrix, dtype=float)
            if walk_matrix.shape != (graph.m, graph.m):
                raise ValueError("walk matrix must be m x m")
            self._walk_cdf = np.cumsum(walk_matrix, axis=1)
        self.walk_matrix = walk_matrix
        self._log_ball = np.log(graph.ball_sizes)

    def _chord(self, node, u):
        return _backend.segment_bounds(self.graph.white, node, u, self.l, self.tol, self.max_iter)

    def _draw_node(self, j, rng):
        if self.walk_matrix is None:
            b = self.graph.balls[j]
            return int(b[rng.integers(len(b))])
        cdf = self._walk_cdf[j]
        return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), self.graph.m - 1))

    def _log_walk_ratio(self, j, i):
        """log of reverse over forward node-selection probability."""
        if self.walk_matrix is None:
            return self._log_ball[j] - self._log_ball[i]
        fwd, rev = self.walk_matrix[j, i], self.walk_matrix[i, j]
        if rev <= 0:
            return -np.inf
        return math.log(rev) - math.log(fwd)

    def propose(self, theta, rng, log_target=None, force_node=None, force_xi=None,
                force_direction=None):
        """Build a :class:`JumpProposal` from ``theta``; nothing is accepted here.

        ``force_*`` pin the random choices (node, offset, direction) and are
        meant for reversibility checks.
        """
        g = self.graph
        theta = np.asarray(theta, dtype=float)
        if log_target is None:
            log_target = self.target.log_kernel(theta)
        x = g.metric.whiten(theta)
        j = int(_backend.nearest(g.white, np.ascontiguousarray(x)))
        diff = x - g.white[j]
        radius = float(np.linalg.norm(diff))
        if force_direction is not None:
            u = g.metric.whiten(np.asarray(force_direction, dtype=float))
            u = u / np.linalg.norm(u)
        elif radius < DEGENERATE_RADIUS:
            u = random_unit_vector(g.p, rng)
        else:
            u = diff / radius
        u = np.ascontiguousarray(u)
        v = g.metric.unwhiten(u)

        i = self._draw_node(j, rng) if force_node is None else int(force_node)
        a_i, b_i = self._chord(i, u)
        xi = rng.uniform(a_i, b_i) if force_xi is None else float(force_xi)
        theta_star = g.nodes[i] + xi * v
        a_j, b_j = self._chord(j, u)

        # signed position of theta along u from beta_j
        back = float(diff @ u) if radius >= DEGENERATE_RADIUS else 0.0
        prop = JumpProposal(j, i, v, (a_i, b_i), (a_j, b_j), xi, radius, theta_star,
                            -np.inf, -np.inf)

        if not (a_i < xi < b_i) or b_i - a_i <= 0:
            prop.reason = "offset outside chord"
            return prop
        if int(_backend.nearest(g.white, np.ascontiguousarray(g.metric.whiten(theta_star)))) != i:
            prop.reason = "proposal left the cell"
            return prop
        if not (a_j < back < b_j) or abs(back) > self.l:
            prop.reason = "reverse move impossible"
            return prop
        log_walk = self._log_walk_ratio(j, i)
        if not np.isfinite(log_walk):
            prop.reason = "reverse node probability is zero"
            return prop
        log_star = self.target.log_kernel(theta_star)
        prop.log_target_star = log_star
        if not np.isfinite(log_star):
            prop.reason = "proposal outside support"
            return prop

        log_jac = 0.0
        if self.radial_jacobian and g.p > 1:
            if xi == 0.0:
                prop.reason = "zero offset"
                return prop
            log_jac = (g.p - 1) * (math.log(abs(xi)) - math.log(max(abs(back), DEGENERATE_RADIUS)))
        prop.log_jacobian = log_jac
        ratio = (log_star - log_target + log_walk + math.log(b_i - a_i)
                 - math.log(b_j - a_j) + log_jac)
        prop.log_accept_ratio = ratio if not math.isnan(ratio) else -np.inf
        return prop

    def step(self, theta, rng, log_target=None):
        """One Metropolis-Hastings graph jump.

        Returns ``(theta_next, log_target_next, proposal)``; on rejection
        ``theta_next`` is the input array itself.
        """
        theta = np.asarray(theta, dtype=float)
        if log_target is None:
            log_target = self.target.log_kernel(theta)
        prop = self.propose(theta, rng, log_target)
        u = rng.random()
        if prop.log_accept_ratio > -np.inf and (
            prop.log_accept_ratio >= 0 or u < math.exp(prop.log_accept_ratio)
        ):
            prop.accepted = True
            return prop.theta_star, prop.log_target_star, prop
        return theta, log_target, prop

    def reverse_of(self, prop, theta):
        """Re-propose from ``prop.theta_star`` back to ``theta`` with the
        random choices pinned; its log ratio should negate ``prop``'s."""
        sign = 1.0 if prop.xi >= 0 else -1.0
        back = self.graph.metric.whiten(np.asarray(theta) - self.graph.nodes[prop.source])
        return self.propose(prop.theta_star, None, prop.log_target_star,
                            force_node=prop.source, force_xi=sign * float(np.linalg.norm(back)),
                            force_direction=sign * prop.direction)


def propose_jump(graph, target, theta, l=None, rng=None, **kwargs):
    return GraphJump(graph, target, l, **kwargs).propose(theta, np.random.default_rng(rng))


def jump_step(graph, target, theta, l=None, rng=None, **kwargs):
    """Returns ``(theta_next, proposal)``."""
    theta_next, _, prop = GraphJump(graph, target, l, **kwargs).step(theta, np.random.default_rng(rng))
    return theta_next, prop


__all__ = [
    "GraphJump",
    "JumpProposal",
    "ball",
    "direction_vector",
    "jump_step",
    "nearest_node",
    "propose_jump",
    "segment_bounds",
]
