import io
import json

import numpy as np
import pytest

from conftest import flat_target
from graphmcmc.baselines import RandomWalkMetropolis, RwmConfig
from graphmcmc.diagnostics import effective_sample_size
from graphmcmc.graph import build_mst
from graphmcmc.jump import GraphJump
from graphmcmc.sampler import ChainState, ChainStreams, RunConfig, mixture_step, run_chain


@pytest.fixture
def gmm_setup(gmm, toy_beta):
    graph = build_mst(toy_beta, gmm, kappa=1.0, r=3)
    return gmm, GraphJump(graph, gmm), RandomWalkMetropolis(gmm, RwmConfig("uniform_box", 1.0))


@pytest.mark.parametrize("kwargs", [dict(w=1.0), dict(w=-0.1), dict(burn_in=10, n_iterations=10),
                                    dict(thinning=0)])
def test_run_config_validation(kwargs):
    with pytest.raises(ValueError):
        RunConfig(**kwargs)


def test_zero_weight_replays_baseline(gmm_setup):
    target, _, base = gmm_setup
    cfg = RunConfig(w=0.0, n_iterations=500, seed=11)
    samples, state, _ = run_chain(target, None, base, cfg, [0.0, 0.0])
    # manual loop on the baseline stream
    rng = ChainStreams(11).base
    theta, lp = np.zeros(2), target.log_kernel(np.zeros(2))
    manual = []
    for _ in range(500):
        theta, lp, _ = base.step(theta, rng, lp)
        manual.append(theta.copy())
    np.testing.assert_array_equal(samples, np.array(manual))
    assert state.tallies["jump_attempts"] == 0


def test_jump_fraction(gmm_setup):
    target, jump, base = gmm_setup
    _, state, _ = run_chain(target, jump, base, RunConfig(w=0.3, n_iterations=10_000, seed=3), [0.0, 0.0])
    frac = state.tallies["jump_attempts"] / 10_000
    assert abs(frac - 0.3) < 0.015
    assert state.tallies["jump_attempts"] + state.tallies["base_attempts"] == 10_000
    assert state.tallies["jump_accepts"] <= state.tallies["jump_attempts"]


def test_burn_in_and_thinning_shapes(gmm_setup):
    target, jump, base = gmm_setup
    s, state, report = run_chain(target, jump, base, RunConfig(w=0.3, n_iterations=101, burn_in=100, seed=0),
                                 [0.0, 0.0])
    assert s.shape == (1, 2)
    assert sum(state.burn_in_tallies.values()) > 0
    assert report.acceptance["burn_in"]["jump_attempts"] + report.acceptance["burn_in"]["base_attempts"] == 100
    s, _, _ = run_chain(target, jump, base, RunConfig(w=0.3, n_iterations=100, thinning=7, seed=0, record=[1]),
                        [0.0, 0.0])
    assert s.shape == (15, 1)


def test_deterministic_given_seed(gmm_setup):
    target, jump, base = gmm_setup
    cfg = RunConfig(w=0.3, n_iterations=2000, seed=5)
    a, _, _ = run_chain(target, jump, base, cfg, [0.0, 0.0])
    b, _, _ = run_chain(target, jump, base, cfg, [0.0, 0.0])
    np.testing.assert_array_equal(a, b)
    c, _, _ = run_chain(target, jump, base, RunConfig(w=0.3, n_iterations=2000, seed=6), [0.0, 0.0])
    assert not np.array_equal(a, c)


def test_bad_start_and_missing_jump(gmm_setup):
    target, _, base = gmm_setup
    with pytest.raises(ValueError):
        run_chain(target, None, base, RunConfig(w=0.3, n_iterations=10), [0.0, 0.0])
    from graphmcmc.targets import CustomTarget
    box = CustomTarget(1, lambda th: 0.0 if abs(th[0]) < 1 else -np.inf)
    with pytest.raises(ValueError):
        run_chain(box, None, RandomWalkMetropolis(box, RwmConfig("gaussian", 1.0)),
                  RunConfig(w=0.0, n_iterations=10), [5.0])


def test_mixture_mean_matches_target(gmm_setup):
    target, jump, base = gmm_setup
    samples, _, _ = run_chain(target, jump, base, RunConfig(w=0.3, n_iterations=60_000, burn_in=1000, seed=2),
                              [0.0, 0.0])
    x = samples[:, 1]
    se = x.std() / np.sqrt(effective_sample_size(x))
    assert abs(x.mean() - 0.4 * 6.0) < 3 * se


def test_log_kernels_finite_and_transcript(gmm_setup):
    target, jump, base = gmm_setup
    streams = ChainStreams(0)
    state = ChainState(np.zeros(2), target.log_kernel(np.zeros(2)))
    buf = io.StringIO()
    for _ in range(300):
        mixture_step(state, jump, base, 0.5, streams, transcript=buf)
        assert np.isfinite(state.log_target)
        assert state.log_target == pytest.approx(target.log_kernel(state.theta))
    lines = buf.getvalue().splitlines()
    assert len(lines) == state.tallies["jump_attempts"]
    rec = json.loads(lines[0])
    assert {"xi", "theta_star", "forward", "reverse", "accepted"} <= set(rec)


def test_flat_target_jumps_are_recorded():
    from conftest import tree_graph
    g = tree_graph([[0.0], [2.0], [4.0]], [[0, 1], [1, 2]], r=1)
    jump = GraphJump(g, flat_target(1), l=3.0)
    base = RandomWalkMetropolis(flat_target(1), RwmConfig("gaussian", 0.5))
    _, state, report = run_chain(flat_target(1), jump, base, RunConfig(w=0.5, n_iterations=2000, seed=1), [0.0])
    assert state.tallies["jump_accepts"] > 0
    assert 0 < report.acceptance["jump"] <= 1
