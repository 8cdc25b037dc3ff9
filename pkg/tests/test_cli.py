import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from graphmcmc.cli import main
from graphmcmc.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

GMM = {
    "kind": "gmm",
    "weights": [0.6, 0.4],
    "means": [[0.0, 0.0], [0.0, 6.0]],
    "covariances": [[[1.0, 0.9], [0.9, 1.0]], [[1.0, -0.9], [-0.9, 1.0]]],
}


def small_gmm(**overrides):
    cfg = {
        "name": "small",
        "seed": 1,
        "target": GMM,
        "approx": {"mixture": {"weights": [0.5, 0.5], "means": [[0.0, 0.0], [0.0, 6.0]],
                               "covariances": [np.eye(2).tolist()] * 2, "m": 50}},
        "run": {"w": 0.3, "n_iterations": 2000, "theta0": [0.0, 0.0],
                "baseline": {"kind": "rwm", "proposal": "uniform_box", "step_size": 1.0}},
    }
    cfg.update(overrides)
    return cfg


def write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def run_cli(*args):
    return main([str(a) for a in args])


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    load_config(path)


def test_unknown_key_is_config_error(tmp_path, capsys):
    cfg = small_gmm()
    cfg["run"]["wieght"] = 0.5
    assert run_cli("run", "--config", write(tmp_path, cfg)) == 2
    assert "wieght" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        parse_config({**small_gmm(), "extra": 1})


@pytest.mark.parametrize("mutate", [
    lambda c: c["run"].update(w=1.5),
    lambda c: c["run"].update(burn_in=5000),
    lambda c: c.update(approx={"csv": "missing.csv"}),
    lambda c: c.update(target={"kind": "banana"}),
    lambda c: c.update(target={"kind": "unknown"}),
])
def test_invalid_configs_exit_2(tmp_path, mutate):
    cfg = small_gmm()
    mutate(cfg)
    assert run_cli("run", "--config", write(tmp_path, cfg)) == 2


def test_missing_and_malformed_files_exit_2(tmp_path):
    assert run_cli("run", "--config", tmp_path / "nope.yaml") == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("target: [unclosed\n")
    assert run_cli("run", "--config", bad) == 2
    bad.write_text("- just\n- a list\n")
    assert run_cli("run", "--config", bad) == 2


def test_runtime_error_exits_1(tmp_path, capsys):
    cfg = small_gmm()
    cfg["target"] = {"kind": "lgm", "simulate": {"n": 3}}
    cfg["run"]["theta0"] = [0.0, 0.0, 0.0, -1.0, 0.25, 2.0]  # tau < 0 has zero density
    cfg["run"]["w"] = 0.0
    cfg["run"]["baseline"] = {"kind": "lgm_gibbs", "step_size": 0.5}
    assert run_cli("run", "--config", write(tmp_path, cfg), "--out", tmp_path / "o") == 1
    assert "error" in capsys.readouterr().err


def test_bad_usage_exits_2(capsys):
    assert run_cli("frobnicate") == 2
    assert run_cli("run") == 2


def test_simulate_is_deterministic(tmp_path):
    cfg = small_gmm(target={"kind": "banana", "simulate": {"n": 100, "theta_true": [1.0, 0.0]}})
    path = write(tmp_path, cfg)
    assert run_cli("simulate", "--config", path, "--out", tmp_path / "a") == 0
    assert run_cli("simulate", "--config", path, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "data.csv").read_bytes()
    assert a == (tmp_path / "b" / "data.csv").read_bytes()
    assert len(read_rows(tmp_path / "a" / "data.csv")) == 101
    assert run_cli("simulate", "--config", path, "--out", tmp_path / "c", "--seed", 9) == 0
    assert a != (tmp_path / "c" / "data.csv").read_bytes()

    lgm = small_gmm(target={"kind": "lgm", "simulate": {"n": 30}})
    assert run_cli("simulate", "--config", write(tmp_path, lgm, "lgm.yaml"), "--out", tmp_path / "l") == 0
    rows = read_rows(tmp_path / "l" / "data.csv")
    assert rows[0] == ["t", "y"]
    t = np.array([float(r[0]) for r in rows[1:]])
    y = np.array([float(r[1]) for r in rows[1:]])
    assert np.all((t >= 0) & (t <= 1)) and np.all(y >= 0) and np.all(y == np.round(y))


def test_simulated_data_feeds_a_run(tmp_path):
    sim = small_gmm(target={"kind": "banana", "simulate": {"n": 50}})
    run_cli("simulate", "--config", write(tmp_path, sim, "sim.yaml"), "--out", tmp_path / "sim")
    cfg = small_gmm(target={"kind": "banana", "data": "sim/data.csv"},
                    approx={"baseline_subsample": {"iterations": 3000, "burn_in": 500, "stride": 25, "m": 100}})
    cfg["run"].update(theta0=[0.0, 1.0], n_iterations=1000,
                      baseline={"kind": "rwm", "proposal": "gaussian", "step_size": 0.5})
    assert run_cli("run", "--config", write(tmp_path, cfg), "--out", tmp_path / "r") == 0
    assert (tmp_path / "r" / "samples.csv").is_file()


def test_build_graph_outputs(tmp_path):
    out = tmp_path / "g"
    assert run_cli("build-graph", "--config", write(tmp_path, small_gmm()), "--out", out) == 0
    assert len(read_rows(out / "edges.csv")) == 1 + 49
    assert len(read_rows(out / "beta.csv")) == 1 + 50
    meta = json.loads((out / "graph.json").read_text())
    assert meta["m"] == 50


def test_build_graph_tuning_table(tmp_path):
    cfg = small_gmm(graph={"tune": {"kappa_grid": [0.5, 1.0], "r_grid": [1, 2, 3]}})
    out = tmp_path / "g"
    assert run_cli("build-graph", "--config", write(tmp_path, cfg), "--out", out) == 0
    rows = read_rows(out / "esjd_table.csv")
    assert rows[0] == ["kappa", "r", "esjd", "selected"]
    assert len(rows) == 7
    assert sum(int(r[3]) for r in rows[1:]) == 1


def test_run_outputs_seed_and_transcript(tmp_path, capsys):
    path = write(tmp_path, small_gmm())
    out = tmp_path / "r"
    assert run_cli("run", "--config", path, "--out", out, "--seed", 4, "--transcript") == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary
    samples = read_rows(out / "samples.csv")
    assert samples[0] == ["theta1", "theta2"] and len(samples) == 2001
    # 17 significant digits round-trip exactly
    cells = [c for row in samples[1:50] for c in row]
    assert all(c == f"{float(c):.17g}" for c in cells)
    for name in ("diagnostics.json", "autocorrelation.csv", "run.json", "baseline_samples.csv"):
        assert (out / name).is_file()
    meta = json.loads((out / "run.json").read_text())
    jumps = (out / "transcript.jsonl").read_text().splitlines()
    assert len(jumps) == meta["chain"]["tallies"]["jump_attempts"] > 0

    again = tmp_path / "r2"
    run_cli("run", "--config", path, "--out", again, "--seed", 4)
    assert (out / "samples.csv").read_bytes() == (again / "samples.csv").read_bytes()


def test_diagnose(tmp_path, capsys):
    path = write(tmp_path, small_gmm())
    out = tmp_path / "r"
    run_cli("run", "--config", path, "--out", out)
    capsys.readouterr()
    assert run_cli("diagnose", "--config", path, "--out", out) == 0
    report = json.loads((out / "samples_report.json").read_text())
    assert len(report["ess"]) == 2
    assert (out / "samples_report_autocorrelation.csv").is_file()
    assert run_cli("diagnose", "--config", path, "--out", tmp_path / "empty") == 2


def test_optimize_walk_and_walk_run(tmp_path):
    cfg = small_gmm(graph={"r": 1, "walk": {"radius": 1, "max_iterations": 30, "use_in_run": True}})
    path = write(tmp_path, cfg)
    out = tmp_path / "w"
    assert run_cli("optimize-walk", "--config", path, "--out", out) == 0
    P = np.loadtxt(out / "walk_matrix.csv", delimiter=",")
    assert P.shape == (50, 50)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-8)
    meta = json.loads((out / "walk.json").read_text())
    assert meta["objective"] <= meta["reference_objective"]
    assert run_cli("run", "--config", path, "--out", tmp_path / "wr") == 0
    assert (tmp_path / "wr" / "walk_matrix.csv").is_file()


def test_scaling_experiment_small(tmp_path):
    cfg = {"name": "sc", "seed": 0, "target": {"kind": "lgm", "simulate": {"n": 5}},
           "scaling": {"settings": [{"n": 5, "m": 20}], "replicates": 2, "gibbs_iterations": 200,
                       "gibbs_burn_in": 50, "iterations": 100}}
    out = tmp_path / "s"
    assert run_cli("scaling-experiment", "--config", write(tmp_path, cfg), "--out", out) == 0
    rates = read_rows(out / "scaling_rates.csv")
    assert len(rates) == 3
    summary = read_rows(out / "scaling_summary.csv")
    assert summary[0] == ["n", "p", "m", "replicates", "mean_rate", "sd_rate"]
    assert summary[1][1] == "8"
    cfg["scaling"]["settings"] = [{"n": 5, "m": 500}]
    assert run_cli("scaling-experiment", "--config", write(tmp_path, cfg), "--out", out) == 2


def test_console_script_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "graphmcmc.cli", "run", "--config", str(tmp_path / "x.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
