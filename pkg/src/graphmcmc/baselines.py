"""Baseline kernels: random-walk Metropolis and the Polya-Gamma Gibbs sampler
for the negative-binomial latent Gaussian model."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .targets import inv_softplus, softplus

PG_TERMS = 200
TARGET_ACCEPT = 0.234


@dataclass(frozen=True)
class RwmConfig:
    """``uniform_box`` uses ``step_size`` as the box half-width, ``gaussian``
    as the proposal standard deviation."""

    proposal: str = "gaussian"
    step_size: float = 1.0

    def __post_init__(self):
        if self.proposal not in ("uniform_box", "gaussian"):
            raise ValueError(f"unknown RWM proposal {self.proposal!r}")
        if not self.step_size > 0:
            raise ValueError("step size must be positive")


def rwm_step(target, theta, config, rng, log_target=None):
    """One symmetric random-walk Metropolis step.

    Returns ``(theta_next, log_target_next, accepted)``.
    """
    theta = np.asarray(theta, dtype=float)
    if log_target is None:
        log_target = target.log_kernel(theta)
    s = config.step_size
    if config.proposal == "uniform_box":
        prop = theta + rng.uniform(-s, s, size=theta.shape)
    else:
        prop = theta + s * rng.standard_normal(theta.shape)
    log_prop = target.log_kernel(prop)
    log_u = math.log(rng.random())
    if log_prop - log_target >= 0 or log_u < log_prop - log_target:
        return prop, log_prop, True
    return theta, log_target, False


class RandomWalkMetropolis:
    """Stateless RWM baseline for the mixture sampler."""

    def __init__(self, target, config):
        self.target = target
        self.config = config

    def step(self, theta, rng, log_target=None):
        return rwm_step(self.target, theta, self.config, rng, log_target)

    def adapt(self, accepted, iteration):
        pass


def sample_polya_gamma(b, c, rng, terms=PG_TERMS):
    """Draw ``PG(b, c)`` from the Gamma series truncated at ``terms`` terms.

    ``b`` and ``c`` broadcast against each other; the result has their
    broadcast shape (a float for scalar inputs).
    """
    b, c = np.broadcast_arrays(np.asarray(b, dtype=float), np.asarray(c, dtype=float))
    if np.any(b <= 0):
        raise ValueError("PG shape b must be positive")
    k = np.arange(1, terms + 1) - 0.5
    denom = k * k + (c[..., None] / (2.0 * np.pi)) ** 2
    g = rng.gamma(np.broadcast_to(b[..., None], denom.shape), 1.0)
    out = np.sum(g / denom, axis=-1) / (2.0 * np.pi ** 2)
    return float(out) if out.ndim == 0 else out


def polya_gamma_mean(b, c):
    """``b tanh(c/2) / (2c)``, with the ``b/4`` limit at ``c = 0``."""
    c = np.asarray(c, dtype=float)
    safe = np.where(np.abs(c) < 1e-8, 1.0, c)
    return np.where(np.abs(c) < 1e-8, b / 4.0, b * np.tanh(safe / 2.0) / (2.0 * safe))


def inverse_gamma_draw(shape, rate, rng):
    if shape <= 0 or rate <= 0:
        raise ValueError("inverse-gamma shape and rate must be positive")
    return rate / rng.gamma(shape, 1.0)


def _chol_jitter(cov, start=0.0, stop=1e-4):
    scale = max(float(np.mean(np.diag(cov))), 1e-300)
    eps = start
    while True:
        try:
            return cholesky(cov + eps * scale * np.eye(cov.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            eps = 1e-10 if eps == 0 else eps * 10
            if eps > stop:
                raise


def mvn_draw(mean, covariance, rng):
    mean = np.asarray(mean, dtype=float)
    L = _chol_jitter(np.asarray(covariance, dtype=float))
    return mean + L @ rng.standard_normal(mean.shape)


@dataclass
class LgmGibbsState:
    z: np.ndarray
    omega: np.ndarray
    tau: float
    h_tilde: float
    r_tilde: float

    @property
    def h(self):
        return float(softplus(self.h_tilde))

    @property
    def r(self):
        return float(softplus(self.r_tilde))

    def theta(self):
        return np.concatenate([self.z, [self.tau, self.h, self.r]])

    @classmethod
    def from_theta(cls, model, theta, omega=None):
        z, tau, h, r = model.split(np.asarray(theta, dtype=float))
        if omega is None:
            omega = np.full(model.n, 0.25)
        return cls(np.array(z, dtype=float), np.asarray(omega, dtype=float), float(tau),
                   float(inv_softplus(h)), float(inv_softplus(r)))


def draw_omega(model, z, r, rng):
    return sample_polya_gamma(r + model.y, z, rng)


def draw_z(model, omega, tau, h, r, rng):
    """``z ~ N(A^{-1}(r - y)/2, A^{-1})`` with ``A = Sigma^{-1} + diag(omega)``.

    With ``Sigma = L L'`` we have ``A^{-1} = L M^{-1} L'`` where
    ``M = I + L' diag(omega) L`` is well conditioned; no inverse is formed.
    """
    Lt, _ = model.chol_tilde(h)
    L = math.sqrt(tau) * Lt
    M = np.eye(model.n) + (L.T * omega) @ L
    R = cholesky(M, lower=True)
    rhs = L.T @ ((r - model.y) / 2.0)
    mean = L @ solve_triangular(R, solve_triangular(R, rhs, lower=True), lower=True, trans="T")
    noise = L @ solve_triangular(R, rng.standard_normal(model.n), lower=True, trans="T")
    return mean + noise


def draw_tau(model, z, h, rng):
    q, _ = model.quad_form(z, h)
    return inverse_gamma_draw(0.5 * model.n + 2.0, 0.5 * q + 1.0, rng)


def rwm_hr_step(model, z, h_tilde, r_tilde, step_size, rng, log_current=None):
    """Gaussian RWM on ``(h~, r~)`` against the collapsed kernel.

    Returns ``(h_tilde, r_tilde, log_kernel, accepted)``.
    """
    if log_current is None:
        log_current = model.collapsed_log_kernel(z, h_tilde, r_tilde)
    hp, rp = np.array([h_tilde, r_tilde]) + step_size * rng.standard_normal(2)
    log_prop = model.collapsed_log_kernel(z, hp, rp)
    if log_prop - log_current >= 0 or math.log(rng.random()) < log_prop - log_current:
        return float(hp), float(rp), log_prop, True
    return h_tilde, r_tilde, log_current, False


def lgm_gibbs_step(model, state, step_size, rng):
    """One sweep: omega | z,r; z | omega,tau,h; (h~,r~) | z with tau and omega
    integrated out; then tau | z,h.

    The collapsed (h~, r~) move must be followed by fresh draws of everything
    it integrated out, so tau is drawn after it and omega at the start of the
    next sweep. Returns ``(new_state, accepted)``.
    """
    r = state.r
    omega = draw_omega(model, state.z, r, rng)
    z = draw_z(model, omega, state.tau, state.h, r, rng)
    h_tilde, r_tilde, _, accepted = rwm_hr_step(model, z, state.h_tilde, state.r_tilde, step_size, rng)
    tau = draw_tau(model, z, float(softplus(h_tilde)), rng)
    return LgmGibbsState(z, omega, tau, h_tilde, r_tilde), accepted


class LgmGibbs:
    """Gibbs baseline on ``theta = (z, tau, h, r)``.

    The ``(h~, r~)`` step size follows a Robbins-Monro recursion on its
    logarithm towards 0.234 acceptance while :meth:`adapt` is being called
    (burn-in only), and stays fixed afterwards.
    """

    def __init__(self, model, step_size=0.5, target_accept=TARGET_ACCEPT):
        self.model = model
        self.target = model
        self.step_size = float(step_size)
        self.target_accept = target_accept

    def step(self, theta, rng, log_target=None):
        # omega is redrawn first thing in the sweep, so it need not be carried
        state = LgmGibbsState.from_theta(self.model, theta)
        new, accepted = lgm_gibbs_step(self.model, state, self.step_size, rng)
        return new.theta(), None, accepted

    def adapt(self, accepted, iteration):
        gain = (iteration + 1.0) ** -0.6
        self.step_size *= math.exp(gain * ((1.0 if accepted else 0.0) - self.target_accept))
