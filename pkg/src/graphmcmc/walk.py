"""Node-to-node transition matrices for the graph walk.

Given a directed support and a target node distribution ``pi``, find a
row-stochastic, ``pi``-stationary matrix ``P`` on that support with small
``||P - 1 pi'||_2``. The solver is a projected subgradient method; the
projection onto the feasible polytope is computed with Dykstra's algorithm,
alternating between the affine set (row sums, stationarity, support pattern)
and the nonnegative orthant.
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

logger = logging.getLogger(__name__)

ROW_TOL = 1e-8
STATIONARY_TOL = 1e-6
NEG_TOL = 1e-10


@dataclass
class WalkProblem:
    """Support mask (``mask[i, j]`` allows ``i -> j``) and stationary law ``pi``.

    Self-loops are always added to the mask.
    """

    pi: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float).ravel()
        m = self.pi.size
        mask = np.array(self.mask, dtype=bool)
        if mask.shape != (m, m):
            raise ValueError("support mask must be m x m")
        if np.any(self.pi <= 0) or abs(self.pi.sum() - 1.0) > 1e-10:
            raise ValueError("pi must be strictly positive and sum to 1")
        np.fill_diagonal(mask, True)
        n_comp, _ = connected_components(mask, directed=True, connection="strong")
        if n_comp != 1:
            raise ValueError("support graph is not strongly connected")
        self.mask = mask

    @property
    def m(self):
        return self.pi.size

    @classmethod
    def from_log_densities(cls, log_densities, mask):
        logd = np.asarray(log_densities, dtype=float)
        return cls(np.exp(logd - logsumexp(logd)), mask)

    @classmethod
    def from_graph(cls, graph, radius=1, exclusion=0.0):
        """Support = node pairs within ``radius`` hops on the tree."""
        m = graph.m
        mask = np.zeros((m, m), dtype=bool)
        sub = graph.with_radius(radius) if radius != graph.r else graph
        for j, b in enumerate(sub.balls):
            mask[j, b] = True
        return cls.from_log_densities(graph.log_densities, _exclude(mask, graph.white, exclusion))

    @classmethod
    def complete(cls, white, log_densities, exclusion=0.0):
        """All ordered pairs, minus those closer than ``exclusion``."""
        white = np.atleast_2d(white)
        m = white.shape[0]
        return cls.from_log_densities(log_densities, _exclude(np.ones((m, m), dtype=bool), white, exclusion))


def _exclude(mask, white, exclusion):
    if exclusion <= 0:
        return mask
    d = np.sqrt(np.sum((white[:, None, :] - white[None, :, :]) ** 2, axis=-1))
    return mask & (d >= exclusion)


@dataclass
class TransitionMatrix:
    P: np.ndarray
    objective: float
    iterations: int = 0
    converged: bool = True
    reference_objective: float = float("nan")
    history: list = field(default_factory=list, repr=False)

    def residuals(self, pi):
        return feasibility_residuals(self.P, pi)

    def metadata(self, pi=None):
        meta = {
            "m": int(self.P.shape[0]),
            "objective": self.objective,
            "reference_objective": self.reference_objective,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        if pi is not None:
            meta.update(self.residuals(pi))
        return meta

    def write(self, csv_path, json_path=None, pi=None):
        np.savetxt(csv_path, self.P, delimiter=",", fmt="%.17g")
        if json_path is not None:
            with open(json_path, "w") as fh:
                json.dump(self.metadata(pi), fh, indent=2)


def spectral_objective(P, pi):
    """``||P - 1 pi'||_2``."""
    return float(np.linalg.norm(P - pi[None, :], 2))


def feasibility_residuals(P, pi):
    return {
        "row_residual": float(np.max(np.abs(P.sum(axis=1) - 1.0))),
        "stationarity_residual": float(np.max(np.abs(pi @ P - pi))),
        "min_entry": float(P.min()),
    }


def is_feasible(P, problem):
    res = feasibility_residuals(P, problem.pi)
    return (res["row_residual"] <= ROW_TOL and res["stationarity_residual"] <= STATIONARY_TOL
            and res["min_entry"] >= -NEG_TOL and not np.any(P[~problem.mask]))


def metropolized_reference(problem):
    """Metropolis-Hastings walk: propose a uniform out-neighbour (self
    excluded), accept with ``min(1, pi_j deg_i / (pi_i deg_j))``; leftover
    mass stays on the diagonal. Edges without a reverse edge get zero."""
    pi, mask = problem.pi, problem.mask.copy()
    np.fill_diagonal(mask, False)
    both = mask & mask.T
    deg = mask.sum(axis=1).astype(float)
    safe = np.where(deg > 0, deg, 1.0)
    ratio = (pi[None, :] * safe[:, None]) / (pi[:, None] * safe[None, :])
    P = np.where(both, np.minimum(1.0, ratio) / safe[:, None], 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    objective = spectral_objective(P, pi)
    return TransitionMatrix(P, objective, reference_objective=objective)


class _AffineProjector:
    """Euclidean projection onto ``{X : X 1 = 1, pi' X = pi', X = 0 off mask}``.

    The multipliers ``(a, b)`` with ``X = Y + M * (a 1' + pi b')`` solve a
    fixed ``2m x 2m`` system, which is factored once via its pseudo-inverse
    (it has a one-dimensional null space from the redundant total-mass
    constraint).
    """

    def __init__(self, pi, mask):
        M = np.asarray(mask, dtype=float)
        m = pi.size
        A = np.zeros((2 * m, 2 * m))
        A[:m, :m] = np.diag(M.sum(axis=1))
        A[:m, m:] = pi[:, None] * M
        A[m:, :m] = (pi[:, None] * M).T
        A[m:, m:] = np.diag((pi[:, None] ** 2 * M).sum(axis=0))
        self.pinv = np.linalg.pinv(A)
        self.pi, self.M, self.m = pi, M, m

    def __call__(self, Y):
        pi, M, m = self.pi, self.M, self.m
        Ym = Y * M
        rhs = np.concatenate([1.0 - Ym.sum(axis=1), pi - pi @ Ym])
        ab = self.pinv @ rhs
        return Ym + M * (ab[:m, None] + pi[:, None] * ab[None, m:])


def _dykstra(Y, affine, max_iter=300, tol=1e-11):
    """Approximately project ``Y`` onto (affine set) ∩ (X >= 0)."""
    X = Y.copy()
    p = np.zeros_like(Y)
    q = np.zeros_like(Y)
    for _ in range(max_iter):
        A = affine(X + p)
        p = X + p - A
        X_new = np.maximum(A + q, 0.0)
        q = A + q - X_new
        done = np.max(np.abs(X_new - X)) < tol
        X = X_new
        if done:
            break
    return X


def _polish(X, problem):
    """Affine projection restricted to the entries Dykstra left positive.

    When the active set is right this lands exactly (to rounding) in the
    feasible polytope; otherwise the caller's feasibility check rejects it.
    """
    active = problem.mask & (X > 0)
    np.fill_diagonal(active, True)
    Z = _AffineProjector(problem.pi, active)(X)
    return np.where(Z < 0, np.where(Z >= -NEG_TOL, 0.0, Z), Z)


def _project(Y, problem, affine, iterations):
    X = _dykstra(Y, affine, iterations)
    if is_feasible(X, problem):
        return X, True
    Z = _polish(X, problem)
    return (Z, True) if is_feasible(Z, problem) else (X, False)


def optimize_transition_matrix(problem, tolerance=1e-6, max_iterations=2000, step=0.5,
                               patience=200, dykstra_iterations=300):
    """Minimize ``||P - 1 pi'||_2`` over feasible ``P`` on the support.

    Starts from the better of the Metropolized reference and the projection
    of ``1 pi'``; returns the best feasible iterate, which is never worse
    than the reference. ``converged`` is False when ``max_iterations`` ran
    out while the best objective was still improving by more than
    ``tolerance`` within the last ``patience`` iterations.
    """
    pi = problem.pi
    ref = metropolized_reference(problem)
    affine = _AffineProjector(pi, problem.mask)
    best_P, best_obj = ref.P, ref.objective

    start, ok = _project(np.broadcast_to(pi, (problem.m, problem.m)).copy(), problem, affine,
                         dykstra_iterations)
    if ok:
        obj = spectral_objective(start, pi)
        if obj < best_obj:
            best_P, best_obj = start, obj

    P = best_P.copy()
    history = [best_obj]
    last_gain = 0
    converged = best_obj <= tolerance
    k = 0
    while not converged and k < max_iterations:
        k += 1
        D = P - pi[None, :]
        U, s, Vt = np.linalg.svd(D)
        G = np.outer(U[:, 0], Vt[0])
        P, ok = _project(P - (step / np.sqrt(k)) * G, problem, affine, dykstra_iterations)
        obj = spectral_objective(P, pi)
        if ok and obj < best_obj - tolerance:
            best_P, best_obj = P.copy(), obj
            last_gain = k
        history.append(best_obj)
        if best_obj <= tolerance or k - last_gain >= patience:
            converged = True
    if not converged:
        logger.warning("walk optimizer stopped after %d iterations without converging", k)
    best_P = np.where(problem.mask, np.maximum(best_P, 0.0), 0.0)
    return TransitionMatrix(best_P, spectral_objective(best_P, pi), k, converged,
                            ref.objective, history)


def weighted_ball_draw(P, j, rng):
    """Draw the next node from row ``j`` of ``P``."""
    row = np.asarray(P[j], dtype=float)
    if np.any(row < -NEG_TOL) or abs(row.sum() - 1.0) > 1e-6:
        raise ValueError(f"row {j} is not a probability vector")
    return int(rng.choice(row.size, p=np.clip(row, 0.0, None) / np.clip(row, 0.0, None).sum()))
