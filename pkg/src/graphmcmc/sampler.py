"""Mixture kernel ``w * jump + (1 - w) * baseline`` and the chain driver."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import build_report

logger = logging.getLogger(__name__)

TALLY_KEYS = ("jump_attempts", "jump_accepts", "base_attempts", "base_accepts")


def _zero_tallies():
    return dict.fromkeys(TALLY_KEYS, 0)


@dataclass
class ChainState:
    theta: np.ndarray
    log_target: float | None = None
    iteration: int = 0
    burn_in_tallies: dict = field(default_factory=_zero_tallies)
    tallies: dict = field(default_factory=_zero_tallies)
    seed: int | None = None
    wall_time: float = 0.0


@dataclass
class RunConfig:
    w: float = 0.3
    n_iterations: int = 10_000
    burn_in: int = 0
    thinning: int = 1
    seed: int = 0
    record: list | None = None

    def __post_init__(self):
        if not 0.0 <= self.w < 1.0:
            raise ValueError("w must lie in [0, 1)")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("need 0 <= burn_in < n_iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


class ChainStreams:
    """Independent generators for kernel choice, baseline and jump moves.

    Keeping them apart makes a ``w = 0`` run replay the pure baseline exactly.
    """

    def __init__(self, seed):
        ss = np.random.SeedSequence(seed)
        select, base, jump = ss.spawn(3)
        self.select = np.random.default_rng(select)
        self.base = np.random.default_rng(base)
        self.jump = np.random.default_rng(jump)


def mixture_step(state, jump, baseline, w, streams, burn_in=False, transcript=None):
    """Advance ``state`` by one iteration of the mixture kernel, in place."""
    tallies = state.burn_in_tallies if burn_in else state.tallies
    use_jump = w > 0 and streams.select.random() < w
    if use_jump:
        if state.log_target is None:
            state.log_target = jump.target.log_kernel(state.theta)
        theta, logp, prop = jump.step(state.theta, streams.jump, state.log_target)
        tallies["jump_attempts"] += 1
        tallies["jump_accepts"] += int(prop.accepted)
        if transcript is not None:
            transcript.write(prop.to_json() + "\n")
        accepted = prop.accepted
    else:
        theta, logp, accepted = baseline.step(state.theta, streams.base, state.log_target)
        tallies["base_attempts"] += 1
        tallies["base_accepts"] += int(accepted)
        if burn_in:
            baseline.adapt(accepted, state.iteration)
    state.theta = theta
    state.log_target = logp
    state.iteration += 1
    return state


def run_chain(target, jump, baseline, config, theta0, transcript=None):
    """Run one chain and summarize it.

    ``jump`` may be ``None`` only when ``config.w == 0``. Returns
    ``(samples, state, report)`` where ``samples`` holds the post-burn-in,
    thinned draws of the recorded coordinates.
    """
    if config.w > 0 and jump is None:
        raise ValueError("a graph-jump kernel is required when w > 0")
    theta0 = np.array(theta0, dtype=float)
    logp0 = target.log_kernel(theta0)
    if not np.isfinite(logp0):
        raise ValueError("initial point has zero target density")
    state = ChainState(theta0, logp0, seed=config.seed)
    streams = ChainStreams(config.seed)
    cols = np.arange(target.dim) if config.record is None else np.asarray(config.record, dtype=int)
    n_keep = (config.n_iterations - config.burn_in + config.thinning - 1) // config.thinning
    out = np.empty((n_keep, cols.size))
    k = 0
    t0 = time.perf_counter()
    for it in range(config.n_iterations):
        burn = it < config.burn_in
        mixture_step(state, jump, baseline, config.w, streams, burn, transcript)
        if not burn and (it - config.burn_in) % config.thinning == 0:
            out[k] = state.theta[cols]
            k += 1
    state.wall_time = time.perf_counter() - t0
    report = build_report(out, state.tallies, config.n_iterations - config.burn_in,
                          labels=[f"theta{c}" for c in cols])
    report.acceptance["burn_in"] = dict(state.burn_in_tallies)
    logger.info("chain done in %.2fs: %s", state.wall_time, report.acceptance)
    return out, state, report
