"""Mixing diagnostics for single chains."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np


def _autocov_fft(x):
    n = x.size
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov


def autocorrelation(series, max_lag=None):
    """Biased (divide-by-N) sample autocorrelation at lags ``0..max_lag``."""
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if max_lag is None:
        max_lag = min(n // 4, 500)
    if n <= max_lag:
        raise ValueError("series must be longer than max_lag")
    acov = _autocov_fft(x)
    if not acov[0] > 1e-12 * max(1.0, float(np.mean(x * x))):
        raise ValueError("series has zero variance")
    rho = acov[: max_lag + 1] / acov[0]
    rho[0] = 1.0
    return rho


def effective_sample_size(series):
    """``N / tau`` with ``tau`` from Geyer's initial positive sequence.

    ``tau = -1 + 2 * sum_k (rho_2k + rho_2k+1)`` over the leading run of
    positive pair sums. Anticorrelated chains can give ``ESS > N``; ``tau``
    is floored at ``1 / log10(N)`` only to keep the estimate finite.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise ValueError("need at least 100 draws for an ESS estimate")
    rho = autocorrelation(x, n - 1)
    npairs = n // 2
    pairs = rho[: 2 * npairs].reshape(npairs, 2).sum(axis=1)
    neg = np.flatnonzero(pairs <= 0)
    stop = neg[0] if neg.size else npairs
    tau = -1.0 + 2.0 * pairs[:stop].sum()
    tau = max(tau, 1.0 / np.log10(n))
    return n / tau


def realized_esjd(samples):
    """Mean squared Euclidean jump between consecutive rows."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    d = np.diff(x, axis=0)
    return float(np.mean(np.sum(d * d, axis=1)))


def _rate(acc, att):
    return acc / att if att else float("nan")


@dataclass
class DiagnosticsReport:
    n_samples: int
    n_iterations: int
    ess: list
    ess_per_iteration: list
    esjd: float
    acceptance: dict
    max_lag: int
    autocorrelation: list = field(repr=False)
    labels: list = field(default_factory=list)

    def to_dict(self, include_curves=False):
        d = asdict(self)
        if not include_curves:
            d.pop("autocorrelation")
        return d

    def to_json(self, path=None, include_curves=False):
        text = json.dumps(self.to_dict(include_curves), indent=2, allow_nan=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def write_autocorrelation_csv(self, path):
        curves = np.array(self.autocorrelation, dtype=float)
        labels = self.labels or [f"x{k}" for k in range(curves.shape[0])]
        with open(path, "w") as fh:
            fh.write("lag," + ",".join(labels) + "\n")
            for lag in range(curves.shape[1]):
                fh.write(f"{lag}," + ",".join(f"{v:.17g}" for v in curves[:, lag]) + "\n")


def build_report(samples, tallies=None, n_iterations=None, labels=None, max_lag=None):
    """Per-coordinate ESS and autocorrelation for a stored chain.

    Coordinates with zero variance get ``nan`` in place of an ESS and a
    curve; that happens when a chain never moves.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    n, p = x.shape
    n_iterations = n if n_iterations is None else int(n_iterations)
    if max_lag is None:
        max_lag = min(n // 4, 500)
    max_lag = max(0, min(max_lag, n - 1))
    ess, curves = [], []
    for k in range(p):
        try:
            curves.append(autocorrelation(x[:, k], max_lag).tolist())
        except ValueError:
            curves.append([float("nan")] * (max_lag + 1))
        try:
            ess.append(float(effective_sample_size(x[:, k])))
        except ValueError:
            ess.append(float("nan"))
    tallies = tallies or {}
    acceptance = {
        "jump": _rate(tallies.get("jump_accepts", 0), tallies.get("jump_attempts", 0)),
        "baseline": _rate(tallies.get("base_accepts", 0), tallies.get("base_attempts", 0)),
        **{k: int(v) for k, v in tallies.items()},
    }
    return DiagnosticsReport(
        n_samples=n,
        n_iterations=n_iterations,
        ess=ess,
        ess_per_iteration=[e / n_iterations for e in ess],
        esjd=realized_esjd(x) if n >= 2 else float("nan"),
        acceptance=acceptance,
        max_lag=max_lag,
        autocorrelation=curves,
        labels=list(labels) if labels is not None else [],
    )
