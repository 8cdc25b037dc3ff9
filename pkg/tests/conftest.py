import numpy as np
import pytest

from graphmcmc.graph import Metric, SampleGraph
from graphmcmc.targets import CustomTarget, GmmTarget, toy_gmm

ACCEPTANCE_LINES = []


@pytest.fixture
def gmm():
    return toy_gmm()


@pytest.fixture
def toy_beta():
    approx = GmmTarget([0.5, 0.5], [[0.0, 0.0], [0.0, 6.0]], [np.eye(2), np.eye(2)])
    return approx.sample(50, np.random.default_rng(0))


def flat_target(p):
    return CustomTarget(p, lambda theta: 0.0)


def tree_graph(nodes, edges, r=1, log_densities=None, metric=None):
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    logd = np.zeros(len(nodes)) if log_densities is None else log_densities
    return SampleGraph(nodes, logd, metric or Metric.euclidean(),
                       np.asarray(edges, dtype=np.int64).reshape(-1, 2), 1.0, r)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
