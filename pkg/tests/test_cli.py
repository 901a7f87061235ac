import csv
import json

import pytest

from unidice.cli import main
from unidice.experiments import fixture_path
from unidice.exact import solve_d
from unidice.experiments import load_fixture

DESIGNED = ["--mdp", str(fixture_path("designed_mdp.json")), "--target", str(fixture_path("designed_target.json")),
            "--behavior", str(fixture_path("designed_behavior.json"))]


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize(
    "prefix,gamma,rho",
    [("single_state", None, 1.0), ("chain", None, 0.5), ("chain", "1", 1.0)],
)
def test_solve(tmp_path, prefix, gamma, rho):
    out = tmp_path / "s.json"
    args = ["solve", "--mdp", str(fixture_path(f"{prefix}_mdp.json")), "--policy", str(fixture_path(f"{prefix}_policy.json")), "--out", str(out)]
    if gamma:
        args += ["--gamma", gamma]
    assert main(args) == 0
    sol = json.loads(out.read_text())
    assert sol["rho"] == pytest.approx(rho)
    assert (sol["lambda_star"] is not None) == (gamma == "1")


def test_solve_bad_file(tmp_path, caplog):
    bad = tmp_path / "m.json"
    bad.write_text('{"n_states": 1}')
    assert main(["solve", "--mdp", str(bad), "--policy", str(bad), "--out", str(tmp_path / "o.json")]) == 2
    assert "missing keys" in caplog.text


def test_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", *DESIGNED, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 24 and all(r["match"] == "1" for r in rows)
    assert main(["sweep", *DESIGNED, "--with-baseline", "--out", str(out)]) == 0
    assert len(read_csv(out)) == 30


def test_sweep_refuses_degenerate(tmp_path):
    mdp, target, _ = load_fixture("designed")
    d = tmp_path / "d.json"
    d.write_text(json.dumps(solve_d(mdp, target).tolist()))
    assert main(["sweep", *DESIGNED, "--d-data", str(d), "--out", str(tmp_path / "s.csv")]) == 3


def test_run_bestdice_on_grid(tmp_path):
    out = tmp_path / "run.csv"
    args = ["run", "--grid", "5", "--estimator", "BestDICE", "--steps", "20000",
            "--lr-primal", "5", "--lr-dual", "0.5", "--lr-lambda", "0.5", "--out", str(out)]
    assert main(args) == 0
    last = read_csv(out)[-1]
    assert int(last["step"]) == 20000
    assert abs(float(last["rho_zeta"]) - float(last["true_rho"])) < 1e-2


def test_run_with_config_file_and_dataset_mode(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha_q": 1, "alpha_zeta": 0, "alpha_r": 0, "positivity": True, "normalization": True, "f1": "half_square", "f2": "half_square"}))
    out = tmp_path / "run.csv"
    args = ["run", *DESIGNED, "--config", str(cfg), "--mode", "dataset", "--n-traj", "5", "--horizon", "20",
            "--steps", "200", "--batch-size", "32", "--lr-primal", "0.05", "--lr-dual", "0.05", "--lr-lambda", "0.05", "--out", str(out)]
    assert main(args) == 0
    assert len(read_csv(out)) == 200


def test_run_bad_config(tmp_path, caplog):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha_r": 3}))
    assert main(["run", *DESIGNED, "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2
    assert "alpha_r" in caplog.text
    cfg.write_text("{")
    assert main(["run", *DESIGNED, "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2


def test_run_divergence_exit_code(tmp_path):
    args = ["run", "--grid", "3", "--estimator", "DualDICE", "--steps", "200", "--lr-primal", "1e4", "--lr-dual", "1e4", "--out", str(tmp_path / "o.csv")]
    assert main(args) == 4


def test_robustness(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["robustness", "--grid", "5", "--transform", "scale:10", "--transform", "shift:5", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 6
    dual = [r for r in rows if r["estimator"] == "dual"]
    assert all(float(r["dev_reference"]) < 1e-8 for r in dual)


def test_missing_env_args(tmp_path):
    assert main(["sweep", "--out", str(tmp_path / "s.csv")]) == 2
