"""Target distributions: unnormalized log posteriors and data simulators.

Every target exposes ``log_kernel(theta)``, which validates its input and
returns ``-inf`` outside the support. Constants that do not depend on
``theta`` are dropped unless noted on the class.
"""

from functools import lru_cache

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import gammaln, logsumexp

LOG_2PI = np.log(2.0 * np.pi)


def as_generator(seed):
    """Return ``seed`` if it is already a Generator, else ``default_rng(seed)``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def softplus(x):
    return np.logaddexp(0.0, x)


def inv_softplus(y):
    """Inverse of ``softplus`` for ``y > 0``; stable for small and large ``y``."""
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


class TargetModel:
    """Base class. Subclasses implement ``_log_kernel`` on a validated vector."""

    kind = "custom"

    def __init__(self, dim):
        if int(dim) < 1:
            raise ValueError("dimension must be a positive integer")
        self.dim = int(dim)

    def log_kernel(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"expected theta of shape ({self.dim},), got {theta.shape}")
        if np.isnan(theta).any():
            raise ValueError("theta contains NaN")
        return float(self._log_kernel(theta))

    def log_kernel_many(self, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.array([self.log_kernel(t) for t in thetas])

    def _log_kernel(self, theta):
        raise NotImplementedError


class CustomTarget(TargetModel):
    """Wraps a user callable ``theta -> log density``."""

    def __init__(self, dim, fn):
        super().__init__(dim)
        self._fn = fn

    def _log_kernel(self, theta):
        return self._fn(theta)


class GmmTarget(TargetModel):
    """Finite Gaussian mixture. Component normalizing constants are kept so
    the weights mean what they say; the overall ``-p/2 log 2pi`` is kept too."""

    kind = "gmm"

    def __init__(self, weights, means, covariances):
        weights = np.asarray(weights, dtype=float)
        means = np.atleast_2d(np.asarray(means, dtype=float))
        covs = np.asarray(covariances, dtype=float)
        k, p = means.shape
        if weights.shape != (k,) or covs.shape != (k, p, p):
            raise ValueError("weights, means and covariances disagree on K or p")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to 1")
        if not np.allclose(covs, np.transpose(covs, (0, 2, 1))):
            raise ValueError("covariances must be symmetric")
        super().__init__(p)
        self.weights = weights
        self.means = means
        self.covariances = covs
        # raises LinAlgError if any covariance is not positive definite
        self._chols = np.array([cholesky(c, lower=True) for c in covs])
        self._log_norm = np.log(weights) - 0.5 * p * LOG_2PI - np.array(
            [np.log(np.diag(L)).sum() for L in self._chols]
        )

    def component_log_densities(self, theta):
        theta = np.atleast_2d(theta)
        out = np.empty((theta.shape[0], len(self.weights)))
        for k, (mu, L) in enumerate(zip(self.means, self._chols)):
            w = solve_triangular(L, (theta - mu).T, lower=True)
            out[:, k] = self._log_norm[k] - 0.5 * np.sum(w * w, axis=0)
        return out

    def _log_kernel(self, theta):
        return logsumexp(self.component_log_densities(theta)[0])

    def log_kernel_many(self, thetas):
        return logsumexp(self.component_log_densities(np.atleast_2d(thetas)), axis=1)

    def assign(self, thetas):
        """Most responsible component for each row."""
        return np.argmax(self.component_log_densities(np.atleast_2d(thetas)), axis=1)

    def sample(self, n, rng):
        rng = as_generator(rng)
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        eps = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.einsum("nij,nj->ni", self._chols[comp], eps)

    @property
    def mean(self):
        return self.weights @ self.means


def toy_gmm():
    """The two-component bivariate mixture used as the toy example."""
    return GmmTarget(
        [0.6, 0.4],
        [[0.0, 0.0], [0.0, 6.0]],
        [[[1.0, 0.9], [0.9, 1.0]], [[1.0, -0.9], [-0.9, 1.0]]],
    )


class BananaTarget(TargetModel):
    """``y_i ~ N(theta_1^2 + theta_2, 1)`` with a standard normal prior on R^2.

    Fully normalized (both the Gaussian likelihood and prior constants are
    kept), so with no data the kernel at the origin is ``-log(2 pi)``.
    """

    kind = "banana"

    def __init__(self, y):
        super().__init__(2)
        self.y = np.asarray(y, dtype=float).ravel()
        self._n = self.y.size
        self._sum = self.y.sum()
        self._sumsq = float(self.y @ self.y)

    def _log_kernel(self, theta):
        mu = theta[0] ** 2 + theta[1]
        # sum_i (y_i - mu)^2 expanded to keep this O(1)
        ss = self._sumsq - 2.0 * mu * self._sum + self._n * mu * mu
        return -0.5 * ss - 0.5 * self._n * LOG_2PI - LOG_2PI - 0.5 * (theta @ theta)

    def log_kernel_many(self, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        mu = thetas[:, 0] ** 2 + thetas[:, 1]
        ss = self._sumsq - 2.0 * mu * self._sum + self._n * mu * mu
        return (-0.5 * ss - 0.5 * self._n * LOG_2PI - LOG_2PI
                - 0.5 * np.sum(thetas * thetas, axis=1))


def simulate_banana_data(n, theta_true, seed=None):
    if int(n) < 1:
        raise ValueError("n must be >= 1")
    theta_true = np.asarray(theta_true, dtype=float)
    if theta_true.shape != (2,):
        raise ValueError("theta_true must have length 2")
    rng = as_generator(seed)
    return theta_true[0] ** 2 + theta_true[1] + rng.standard_normal(int(n))


class LgmModel(TargetModel):
    """Negative-binomial latent Gaussian model on ``theta = (z, tau, h, r)``.

    ``Sigma(tau, h) = tau * (S(h) + eps I)`` with the squared-exponential
    ``S(h)_ij = exp(-(t_i - t_j)^2 / (2h))``; ``eps`` starts at ``jitter`` and
    grows tenfold until the Cholesky succeeds or exceeds ``max_jitter``.

    Priors: ``tau, h ~ Inverse-Gamma(2, 1)``, ``r ~ N(0, 1)`` truncated to
    ``(0, inf)``. The count likelihood keeps the ``r``-dependent
    ``log Gamma(r + y) - log Gamma(r)`` term and drops ``log y!``.
    """

    kind = "lgm"

    def __init__(self, t, y, jitter=1e-8, max_jitter=1e-4):
        t = np.asarray(t, dtype=float).ravel()
        y = np.asarray(y).ravel()
        if t.shape != y.shape:
            raise ValueError("t and y must have the same length")
        if np.any(y < 0) or np.any(np.asarray(y) != np.round(y)):
            raise ValueError("counts must be nonnegative integers")
        super().__init__(t.size + 3)
        self.n = t.size
        self.t = t
        self.y = y.astype(float)
        self.jitter = float(jitter)
        self.max_jitter = float(max_jitter)
        self._sqdiff = (t[:, None] - t[None, :]) ** 2
        self._chol = lru_cache(maxsize=16)(self._chol_uncached)

    def split(self, theta):
        n = self.n
        return theta[:n], theta[n], theta[n + 1], theta[n + 2]

    def kernel_matrix(self, h):
        """``S(h)`` without jitter."""
        return np.exp(-self._sqdiff / (2.0 * h))

    def _chol_uncached(self, h):
        S = self.kernel_matrix(h)
        eps = self.jitter
        while eps <= self.max_jitter * (1 + 1e-12):
            try:
                return cholesky(S + eps * np.eye(self.n), lower=True), eps
            except np.linalg.LinAlgError:
                eps *= 10.0
        raise np.linalg.LinAlgError(
            f"Cholesky of the h={h:g} kernel matrix failed at jitter {self.max_jitter:g}"
        )

    def chol_tilde(self, h):
        """Lower Cholesky factor of ``S(h) + eps I`` and the ``eps`` used."""
        return self._chol(float(h))

    def quad_form(self, z, h):
        """``z' (S(h) + eps I)^{-1} z`` and ``log|S(h) + eps I| / 2``."""
        L, _ = self.chol_tilde(h)
        w = solve_triangular(L, z, lower=True)
        return float(w @ w), float(np.log(np.diag(L)).sum())

    def nb_log_lik(self, z, r):
        y = self.y
        return float(np.sum(r * z - (r + y) * softplus(z) + gammaln(r + y)) - self.n * gammaln(r))

    def _log_kernel(self, theta):
        z, tau, h, r = self.split(theta)
        if tau <= 0 or h <= 0 or r <= 0:
            return -np.inf
        q, half_logdet = self.quad_form(z, h)
        n = self.n
        gauss = -0.5 * n * np.log(tau) - half_logdet - 0.5 * q / tau
        prior = (-3.0 * np.log(tau) - 1.0 / tau) + (-3.0 * np.log(h) - 1.0 / h) - 0.5 * r * r
        return self.nb_log_lik(z, r) + gauss + prior

    def collapsed_log_kernel(self, z, h_tilde, r_tilde):
        """Log density of ``(z, h~, r~)`` with ``tau`` and the Polya-Gamma
        variables integrated out; includes the softplus log-Jacobians."""
        z = np.asarray(z, dtype=float)
        if not (np.all(np.isfinite(z)) and np.isfinite(h_tilde) and np.isfinite(r_tilde)):
            raise ValueError("collapsed kernel needs finite inputs")
        h = float(softplus(h_tilde))
        r = float(softplus(r_tilde))
        if h <= 0 or r <= 0:
            return -np.inf
        q, half_logdet = self.quad_form(z, h)
        gauss = -half_logdet - (0.5 * self.n + 2.0) * np.log1p(0.5 * q)
        prior = (-3.0 * np.log(h) - 1.0 / h) - 0.5 * r * r
        jac = float(log_sigmoid(h_tilde) + log_sigmoid(r_tilde))
        return self.nb_log_lik(z, r) + gauss + prior + jac

    def cov_solve(self, h, b):
        L, _ = self.chol_tilde(h)
        return cho_solve((L, True), b)


def lgm_collapsed_log_kernel(model, z, h_tilde, r_tilde):
    return model.collapsed_log_kernel(z, h_tilde, r_tilde)


def simulate_lgm_data(n, tau, h, r, seed=None, jitter=1e-8):
    """Equally spaced ``t`` on [0, 1], ``z ~ N(0, Sigma(tau, h))`` and
    negative-binomial counts with success probability ``logistic(z)``."""
    if tau <= 0 or h <= 0 or r <= 0:
        raise ValueError("tau, h and r must be positive")
    rng = as_generator(seed)
    t = np.linspace(0.0, 1.0, int(n))
    model = LgmModel(t, np.zeros(int(n)), jitter=jitter)
    L, _ = model.chol_tilde(h)
    z = np.sqrt(tau) * (L @ rng.standard_normal(int(n)))
    p = np.exp(log_sigmoid(z))
    y = rng.negative_binomial(r, p)
    return t, y.astype(np.int64)


def lgm_initial_state(model):
    """A deterministic, in-support starting point ``(z=0, tau=1, h=0.25, r=1)``."""
    theta = np.zeros(model.dim)
    theta[model.n:] = (1.0, 0.25, 1.0)
    return theta
