"""Graph-accelerated MCMC over approximate posterior samples."""

from ._backend import BACKEND
from .baselines import LgmGibbs, RandomWalkMetropolis, RwmConfig, sample_polya_gamma
from .diagnostics import autocorrelation, build_report, effective_sample_size, realized_esjd
from .graph import Metric, SampleGraph, build_mst, esjd_estimate, nearest_node, tune_kappa_r
from .jump import GraphJump, JumpProposal
from .sampler import RunConfig, run_chain
from .targets import BananaTarget, CustomTarget, GmmTarget, LgmModel, TargetModel, toy_gmm
from .walk import WalkProblem, metropolized_reference, optimize_transition_matrix

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BananaTarget",
    "CustomTarget",
    "GmmTarget",
    "GraphJump",
    "JumpProposal",
    "LgmGibbs",
    "LgmModel",
    "Metric",
    "RandomWalkMetropolis",
    "RunConfig",
    "RwmConfig",
    "SampleGraph",
    "TargetModel",
    "WalkProblem",
    "autocorrelation",
    "build_mst",
    "build_report",
    "effective_sample_size",
    "esjd_estimate",
    "metropolized_reference",
    "nearest_node",
    "optimize_transition_matrix",
    "realized_esjd",
    "run_chain",
    "sample_polya_gamma",
    "toy_gmm",
    "tune_kappa_r",
]
