"""Experiment commands behind the CLI.

Each ``cmd_*`` takes a validated :class:`ExperimentConfig` and an output
directory, writes its artifacts there and returns a small summary dict.
Given the same config and seed every file written is byte-identical
(wall-clock times only appear in the JSON metadata).
"""

import csv
import importlib
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import _backend
from .baselines import LgmGibbs, RandomWalkMetropolis, RwmConfig
from .config import ConfigError
from .diagnostics import build_report
from .graph import Metric, build_mst, load_samples_csv, node_log_densities, tune_kappa_r, write_edges_csv
from .jump import GraphJump
from .sampler import RunConfig, run_chain
from .targets import (BananaTarget, CustomTarget, GmmTarget, LgmModel, lgm_initial_state,
                      simulate_banana_data, simulate_lgm_data)
from .walk import WalkProblem, optimize_transition_matrix

logger = logging.getLogger(__name__)


def child_seed(seed, *tags):
    """Deterministic 32-bit seed for a named sub-task of a run."""
    return int(np.random.SeedSequence([int(seed), *map(int, tags)]).generate_state(1)[0])


# stream tags for child_seed
DATA, APPROX, CHAIN = 1, 2, 3


def fmt(x):
    return f"{x:.17g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_matrix(path, header, X):
    write_csv(path, header, (list(map(float, r)) for r in np.atleast_2d(X)))


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# ---------------------------------------------------------------- targets


def load_data(target_cfg, seed):
    """Observed data for banana/lgm targets: ``y`` or ``(t, y)``."""
    if target_cfg.kind == "banana":
        if target_cfg.data is not None:
            return _read_columns(target_cfg.data, ["y"])["y"]
        sim = target_cfg.simulate
        s = child_seed(seed, DATA) if sim.seed is None else sim.seed
        return simulate_banana_data(sim.n, sim.theta_true, s)
    if target_cfg.kind == "lgm":
        if target_cfg.data is not None:
            cols = _read_columns(target_cfg.data, ["t", "y"])
            return cols["t"], cols["y"]
        sim = target_cfg.simulate
        s = child_seed(seed, DATA) if sim.seed is None else sim.seed
        return simulate_lgm_data(sim.n, sim.tau, sim.h, sim.r, s, jitter=target_cfg.jitter)
    raise ConfigError(f"target kind {target_cfg.kind!r} has no data")


def _read_columns(path, names):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != names:
        raise ConfigError(f"{path}: expected header {','.join(names)}")
    try:
        arr = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, len(names))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return {n: arr[:, k] for k, n in enumerate(names)}


def make_target(cfg):
    t = cfg.target
    if t.kind == "gmm":
        try:
            return GmmTarget(t.weights, t.means, t.covariances)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise ConfigError(f"invalid mixture: {exc}") from None
    if t.kind == "banana":
        return BananaTarget(load_data(t, cfg.seed))
    if t.kind == "lgm":
        times, y = load_data(t, cfg.seed)
        return LgmModel(times, y, jitter=t.jitter, max_jitter=t.max_jitter)
    mod, _, name = t.callable.partition(":")
    try:
        fn = getattr(importlib.import_module(mod), name)
    except (ImportError, AttributeError, ValueError) as exc:
        raise ConfigError(f"cannot import custom target {t.callable!r}: {exc}") from None
    return CustomTarget(t.dim, fn)


def make_baseline(cfg, target):
    b = cfg.run.baseline
    if b.kind == "lgm_gibbs":
        if not isinstance(target, LgmModel):
            raise ConfigError("the lgm_gibbs baseline needs an lgm target")
        return LgmGibbs(target, step_size=b.step_size)
    return RandomWalkMetropolis(target, RwmConfig(b.proposal, b.step_size))


def initial_theta(cfg, target):
    if cfg.run.theta0 is not None:
        theta0 = np.asarray(cfg.run.theta0, dtype=float)
        if theta0.shape != (target.dim,):
            raise ConfigError(f"run.theta0 must have length {target.dim}")
        return theta0
    if isinstance(target, LgmModel):
        return lgm_initial_state(target)
    return np.zeros(target.dim)


# ------------------------------------------------------- graph pieces


def approximate_samples(cfg, target):
    a = cfg.approx
    if a is None:
        raise ConfigError("this command needs an 'approx' block")
    if a.csv is not None:
        beta = load_samples_csv(a.csv)
    elif a.mixture is not None:
        mix = a.mixture
        try:
            approx = GmmTarget(mix.weights, mix.means, mix.covariances)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise ConfigError(f"invalid approximating mixture: {exc}") from None
        s = child_seed(cfg.seed, APPROX) if mix.seed is None else mix.seed
        beta = approx.sample(mix.m, np.random.default_rng(s))
    else:
        sub = a.baseline_subsample
        s = child_seed(cfg.seed, APPROX) if sub.seed is None else sub.seed
        if sub.burn_in >= sub.iterations:
            raise ConfigError("approx.baseline_subsample.burn_in must be below iterations")
        pilot, _, _ = run_chain(target, None, make_baseline(cfg, target),
                                RunConfig(w=0.0, n_iterations=sub.iterations, burn_in=sub.burn_in,
                                          thinning=sub.stride, seed=s),
                                initial_theta(cfg, target))
        if pilot.shape[0] < sub.m:
            raise ConfigError(f"pilot chain kept {pilot.shape[0]} draws, fewer than m={sub.m}")
        beta = pilot[: sub.m]
    beta = np.atleast_2d(beta)
    if beta.shape[1] != target.dim:
        raise ConfigError(f"approximate samples have {beta.shape[1]} columns, target needs {target.dim}")
    if beta.shape[0] < 2:
        raise ConfigError("need at least 2 approximate samples")
    return beta


def make_metric(kind, beta):
    return Metric.from_samples(beta) if kind == "mahalanobis" else Metric.euclidean()


def make_graph(cfg, target, beta):
    """Returns ``(graph, esjd_table or None)``."""
    g = cfg.graph
    metric = make_metric(g.metric, beta)
    logd = node_log_densities(beta, target)
    kappa, r, table = g.kappa, g.r, None
    if g.tune is not None:
        kappa, r, table = tune_kappa_r(beta, target, metric, g.tune.kappa_grid, g.tune.r_grid, logd)
    graph = build_mst(beta, target, metric, kappa, r, logd, g.algorithm)
    return graph, table


def make_walk(cfg, graph):
    wc = cfg.graph.walk
    if wc.support == "complete":
        problem = WalkProblem.complete(graph.white, graph.log_densities, wc.exclusion)
    else:
        problem = WalkProblem.from_graph(graph, wc.radius, wc.exclusion)
    return problem, optimize_transition_matrix(problem, wc.tolerance, wc.max_iterations)


def _labels(target, record=None):
    cols = range(target.dim) if record is None else record
    if isinstance(target, LgmModel):
        names = [f"z{k}" for k in range(target.n)] + ["tau", "h", "r"]
        return [names[c] for c in cols]
    return [f"theta{c + 1}" for c in cols]


def _write_graph(out, cfg, graph, beta, table):
    write_matrix(out / "beta.csv", [f"x{k + 1}" for k in range(graph.p)], beta)
    write_edges_csv(graph, out / "edges.csv")
    if table is not None:
        best = max(v for _, _, v in table)
        chosen = (graph.kappa, graph.r)
        write_csv(out / "esjd_table.csv", ["kappa", "r", "esjd", "selected"],
                  [(float(k), r, float(v), int((k, r) == chosen)) for k, r, v in table])
        logger.info("tuned kappa=%g r=%d (esjd %.4g)", graph.kappa, graph.r, best)
    write_json(out / "graph.json", {
        "m": graph.m, "p": graph.p, "kappa": graph.kappa, "r": graph.r,
        "metric": graph.metric.kind, "total_cost": float(np.sum(graph.edge_costs)),
        "truncation": cfg.graph.truncation or graph.default_truncation(),
        "mean_ball_size": float(graph.ball_sizes.mean()),
    })


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg, out):
    t = cfg.target
    if t.kind not in ("banana", "lgm") or getattr(t, "simulate", None) is None:
        raise ConfigError("simulate needs a banana or lgm target with a 'simulate' block")
    data = load_data(t, cfg.seed)
    if t.kind == "banana":
        write_csv(out / "data.csv", ["y"], ([float(v)] for v in data))
        n = len(data)
    else:
        times, y = data
        write_csv(out / "data.csv", ["t", "y"], ([float(a), int(b)] for a, b in zip(times, y)))
        n = len(y)
    return {"data": str(out / "data.csv"), "n": n}


def cmd_build_graph(cfg, out):
    target = make_target(cfg)
    beta = approximate_samples(cfg, target)
    graph, table = make_graph(cfg, target, beta)
    _write_graph(out, cfg, graph, beta, table)
    return {"m": graph.m, "edges": len(graph.edges), "kappa": graph.kappa, "r": graph.r}


def _run_one(target, jump, baseline, run_cfg, theta0, out, prefix, labels, transcript=None):
    samples, state, report = run_chain(target, jump, baseline, run_cfg, theta0, transcript)
    report.labels = labels
    write_matrix(out / f"{prefix}samples.csv", labels, samples)
    report.to_json(out / f"{prefix}diagnostics.json")
    report.write_autocorrelation_csv(out / f"{prefix}autocorrelation.csv")
    return samples, state, report


def cmd_run(cfg, out, transcript=False):
    target = make_target(cfg)
    rc = cfg.run
    theta0 = initial_theta(cfg, target)
    labels = _labels(target, rc.record)
    chain_seed = child_seed(cfg.seed, CHAIN)
    run_cfg = RunConfig(w=rc.w, n_iterations=rc.n_iterations, burn_in=rc.burn_in,
                        thinning=rc.thinning, seed=chain_seed, record=rc.record)
    meta = {"name": cfg.name, "seed": cfg.seed, "chain_seed": chain_seed, "backend": _backend.BACKEND,
            "config": cfg.model_dump(mode="json")}
    summary = {}

    jump = None
    if rc.w > 0:
        t0 = time.perf_counter()
        beta = approximate_samples(cfg, target)
        graph, table = make_graph(cfg, target, beta)
        _write_graph(out, cfg, graph, beta, table)
        walk_matrix = None
        if cfg.graph.walk is not None and cfg.graph.walk.use_in_run:
            problem, tm = make_walk(cfg, graph)
            tm.write(out / "walk_matrix.csv", out / "walk.json", problem.pi)
            walk_matrix = tm.P
        jump = GraphJump(graph, target, l=cfg.graph.truncation, walk_matrix=walk_matrix,
                         radial_jacobian=cfg.graph.radial_jacobian)
        meta["graph_seconds"] = time.perf_counter() - t0

    fh = open(out / "transcript.jsonl", "w") if transcript and jump is not None else None
    try:
        _, state, report = _run_one(target, jump, make_baseline(cfg, target), run_cfg, theta0,
                                    out, "", labels, fh)
    finally:
        if fh is not None:
            fh.close()
    meta["chain"] = {"wall_time": state.wall_time, "tallies": state.tallies,
                     "burn_in_tallies": state.burn_in_tallies}
    summary["ess_per_iteration"] = dict(zip(labels, report.ess_per_iteration))
    summary["acceptance"] = {k: report.acceptance[k] for k in ("jump", "baseline")}

    if rc.compare_baseline and rc.w > 0:
        base_cfg = RunConfig(w=0.0, n_iterations=rc.n_iterations, burn_in=rc.burn_in,
                             thinning=rc.thinning, seed=chain_seed, record=rc.record)
        _, bstate, breport = _run_one(target, None, make_baseline(cfg, target), base_cfg, theta0,
                                      out, "baseline_", labels)
        meta["baseline_chain"] = {"wall_time": bstate.wall_time, "tallies": bstate.tallies}
        summary["baseline_ess_per_iteration"] = dict(zip(labels, breport.ess_per_iteration))
        summary["ess_ratio"] = {
            k: (a / b if b > 0 else float("nan"))
            for k, a, b in zip(labels, report.ess_per_iteration, breport.ess_per_iteration)
        }
    meta["summary"] = summary
    write_json(out / "run.json", meta)
    return summary


def cmd_diagnose(cfg, out):
    path = cfg.diagnose.samples or (out / "samples.csv")
    if not Path(path).is_file():
        raise ConfigError(f"no samples to diagnose at {path}")
    with open(path) as fh:
        labels = next(csv.reader(fh))
    X = load_samples_csv(path)
    report = build_report(X, labels=labels, max_lag=cfg.diagnose.max_lag)
    stem = Path(path).stem
    report.to_json(out / f"{stem}_report.json")
    report.write_autocorrelation_csv(out / f"{stem}_report_autocorrelation.csv")
    return {"ess": dict(zip(labels, report.ess)), "esjd": report.esjd}


def scaling_replicate(sc, n, m, seed):
    """One replicate: data, Gibbs pilot, graph, accelerated chain. Returns tallies."""
    t, y = simulate_lgm_data(n, sc.tau, sc.h, sc.r_true, child_seed(seed, DATA))
    model = LgmModel(t, y)
    gibbs = LgmGibbs(model)
    pilot, _, _ = run_chain(model, None, gibbs,
                            RunConfig(w=0.0, n_iterations=sc.gibbs_iterations, burn_in=sc.gibbs_burn_in,
                                      seed=child_seed(seed, APPROX)),
                            lgm_initial_state(model))
    beta = pilot[:m]
    graph = build_mst(beta, model, make_metric(sc.metric, beta), sc.kappa, sc.r)
    jump = GraphJump(graph, model, radial_jacobian=sc.radial_jacobian)
    # the Gibbs step size stays at the value tuned during the pilot burn-in
    _, state, _ = run_chain(model, jump, gibbs,
                            RunConfig(w=sc.w, n_iterations=sc.iterations, burn_in=0,
                                      seed=child_seed(seed, CHAIN)),
                            pilot[-1])
    return state.tallies


def cmd_scaling_experiment(cfg, out):
    sc = cfg.scaling
    if sc is None:
        raise ConfigError("scaling-experiment needs a 'scaling' block")
    rows, summary = [], []
    for setting in sc.settings:
        rates = []
        for rep in range(sc.replicates):
            seed = child_seed(cfg.seed, setting.n, setting.m, rep)
            t0 = time.perf_counter()
            tallies = scaling_replicate(sc, setting.n, setting.m, seed)
            att, acc = tallies["jump_attempts"], tallies["jump_accepts"]
            rate = acc / att if att else float("nan")
            rates.append(rate)
            rows.append((setting.n, setting.n + 3, setting.m, rep, seed, att, acc, float(rate)))
            logger.info("n=%d m=%d rep=%d: %d/%d jumps accepted (%.1fs)",
                        setting.n, setting.m, rep, acc, att, time.perf_counter() - t0)
        summary.append((setting.n, setting.n + 3, setting.m, len(rates),
                        float(np.mean(rates)), float(np.std(rates, ddof=1)) if len(rates) > 1 else float("nan")))
    write_csv(out / "scaling_rates.csv",
              ["n", "p", "m", "replicate", "seed", "jump_attempts", "jump_accepts", "rate"], rows)
    write_csv(out / "scaling_summary.csv", ["n", "p", "m", "replicates", "mean_rate", "sd_rate"], summary)
    return {"mean_rate": {f"n={s[0]},m={s[2]}": s[4] for s in summary}}


def cmd_optimize_walk(cfg, out):
    if cfg.graph.walk is None:
        raise ConfigError("optimize-walk needs a 'graph.walk' block")
    target = make_target(cfg)
    beta = approximate_samples(cfg, target)
    graph, table = make_graph(cfg, target, beta)
    _write_graph(out, cfg, graph, beta, table)
    problem, tm = make_walk(cfg, graph)
    tm.write(out / "walk_matrix.csv", out / "walk.json", problem.pi)
    return {"objective": tm.objective, "reference_objective": tm.reference_objective,
            "converged": tm.converged, "iterations": tm.iterations}


COMMANDS = {
    "simulate": cmd_simulate,
    "build-graph": cmd_build_graph,
    "run": cmd_run,
    "diagnose": cmd_diagnose,
    "scaling-experiment": cmd_scaling_experiment,
    "optimize-walk": cmd_optimize_walk,
}
