from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from qsga.cli import EXPERIMENTS, ConfigError, ExperimentConfig, main, run
from qsga.cli.main import report_schema

HERE = Path(__file__).parent
CONFIGS = HERE / "configs"
GOLDEN = HERE / "golden"

SMALL_CONFIGS = {
    "orthogonality": {"hash": {"family": "random_table", "k": 8, "N": 8}},
    "gmp-verify": {"hash": {"family": "random_table", "k": 2, "N": 5}, "preset": "ddh"},
    "game-distance": {"hash": {"family": "random_table", "k": 2, "N": 5}, "M": [[1, 2]]},
    "structured": {"hash": {"family": "random_table", "k": 2, "N": 5}, "preset": "lhs", "m": 4,
                   "samples": 2},
    "lhs-fraction": {"hash": {"family": "random_table", "k": 2, "N": 5}, "N": 5, "m": 4,
                     "matrix_trials": 30},
    "mh-inj": {"hash": {"family": "random_table", "k": 2, "N": 64}, "M": [[1]]},
    "attack-simon": {"n": 2, "ell": 12, "trials": 20},
    "attack-dlog": {"N": 8, "ell": 60, "trials": 10},
    "money": {"hash": {"family": "random_table", "k": 6, "N": 8}, "mints": 5, "trials": 500},
    "qkd": {"n": 64, "runs": 20},
    "hash-audit": {"hash": {"family": "small_range", "k": 6, "N": 11, "params": {"r": 3}}},
}


def write(tmp_path: Path, cfg: dict, name: str = "cfg.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def close(a, b, tol=1e-12):
    """Exact equality except floats, which may differ by ``tol``."""
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(close(a[k], b[k], tol) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(close(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return isinstance(a, (int, float)) and isinstance(b, (int, float)) and abs(a - b) <= tol
    return a == b


def test_every_experiment_has_a_smoke_config():
    assert set(SMALL_CONFIGS) == set(EXPERIMENTS)


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_reports_validate_against_schema(experiment, tmp_path, capsys):
    cfg = {"experiment": experiment, "seed": 1, "params": SMALL_CONFIGS[experiment]}
    code = main([experiment, "--config", str(write(tmp_path, cfg))])
    doc = json.loads(capsys.readouterr().out)
    jsonschema.validate(doc, report_schema())
    assert code in (0, 1)
    assert code == (0 if doc["body"]["all_pass"] else 1)


@pytest.mark.parametrize("name,experiment", [("gmp_verify_ddh", "gmp-verify"),
                                             ("attack_simon", "attack-simon")])
def test_report_body_matches_golden(name, experiment, tmp_path):
    out = tmp_path / "report.json"
    assert main([experiment, "--config", str(CONFIGS / f"{name}.json"), "--out", str(out)]) == 0
    body = json.loads(out.read_text())["body"]
    body.pop("library_version")
    golden = json.loads((GOLDEN / f"cli_{name}.json").read_text())
    assert close(body, golden)


def test_body_independent_of_thread_count(tmp_path, monkeypatch):
    cfg = write(tmp_path, {"experiment": "attack-dlog", "seed": 4, "params": SMALL_CONFIGS["attack-dlog"]})
    bodies = []
    for threads in ("1", "4"):
        monkeypatch.setenv("QSGA_THREADS", threads)
        out = tmp_path / f"r{threads}.json"
        main(["attack-dlog", "--config", str(cfg), "--out", str(out)])
        doc = json.loads(out.read_text())
        assert doc["timings"]["threads"] == int(threads)
        bodies.append(json.dumps(doc["body"], sort_keys=True))
    assert bodies[0] == bodies[1]


def test_seed_override_changes_only_seeded_results(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "qkd", "seed": 1, "params": SMALL_CONFIGS["qkd"]})
    main(["qkd", "--config", str(cfg)])
    a = json.loads(capsys.readouterr().out)["body"]
    main(["qkd", "--config", str(cfg), "--seed", "1"])
    b = json.loads(capsys.readouterr().out)["body"]
    main(["qkd", "--config", str(cfg), "--seed", "2"])
    c = json.loads(capsys.readouterr().out)["body"]
    assert a == b
    assert c["config"]["seed"] == 2 and c["metrics"] != a["metrics"]


def test_csv_output(tmp_path):
    cfg = write(tmp_path, {"experiment": "attack-simon", "seed": 0, "params": SMALL_CONFIGS["attack-simon"]})
    out = tmp_path / "simon.json"
    main(["attack-simon", "--config", str(cfg), "--out", str(out), "--csv"])
    lines = out.with_suffix(".csv").read_text().splitlines()
    assert lines[0] == "trial,planted,recovered,success"
    assert len(lines) == 21


def test_failing_verdict_exits_one(tmp_path, capsys):
    cfg = {"experiment": "hash-audit", "params": SMALL_CONFIGS["hash-audit"],
           "tolerances": {"expected_image_size": 99}}
    assert main(["hash-audit", "--config", str(write(tmp_path, cfg))]) == 1
    body = json.loads(capsys.readouterr().out)["body"]
    assert body["verdicts"]["image_size"]["pass"] is False


def test_budget_exhaustion_marks_incomplete(tmp_path, capsys):
    cfg = {"experiment": "attack-dlog", "params": {"N": 8, "ell": 60, "trials": 64},
           "budget_seconds": 1e-9}
    assert main(["attack-dlog", "--config", str(write(tmp_path, cfg))]) == 1
    body = json.loads(capsys.readouterr().out)["body"]
    assert body["complete"] is False and body["all_pass"] is False


def test_monte_carlo_gmp_verify_is_not_asserted(tmp_path, capsys):
    params = dict(SMALL_CONFIGS["gmp-verify"], mode="monte_carlo", samples=200)
    main(["gmp-verify", "--config", str(write(tmp_path, {"experiment": "gmp-verify", "params": params}))])
    body = json.loads(capsys.readouterr().out)["body"]
    assert body["mode"] == "monte_carlo"
    assert body["verdicts"]["densmatrix_identity"]["pass"] is None


@pytest.mark.parametrize("cfg,needle", [
    ({"experiment": "qkd", "surprise": 1}, "unknown config fields"),
    ({"experiment": "money"}, "but the command asked for"),
    ({"experiment": "qkd", "params": {"n": 7}}, "even"),
    ({"experiment": "qkd", "budget_seconds": 0}, "budget"),
    ({"experiment": "attack-dlog", "params": {"N": 8}}, "ell"),
    ({"experiment": "attack-dlog", "params": {"ell": 4, "hash": {"family": "random_table", "k": 3, "N": 8}}},
     "missing parameter 'N'"),
    ({"experiment": "orthogonality", "params": {"hash": {"family": "polynomial_kwise", "k": 4, "N": 7,
                                                         "params": {"t": 2}}}}, "2^k <= N"),
])
def test_config_errors_exit_two(cfg, needle, tmp_path, capsys):
    experiment = "qkd" if cfg["experiment"] == "money" else cfg["experiment"]
    assert main([experiment, "--config", str(write(tmp_path, cfg))]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and needle in err["message"]


def test_unreadable_config_and_csv_without_out(tmp_path, capsys):
    assert main(["qkd", "--config", str(tmp_path / "missing.json")]) == 2
    capsys.readouterr()
    cfg = write(tmp_path, {"experiment": "qkd", "params": SMALL_CONFIGS["qkd"]})
    assert main(["qkd", "--config", str(cfg), "--csv"]) == 2


def test_bad_thread_setting(monkeypatch):
    monkeypatch.setenv("QSGA_THREADS", "zero")
    with pytest.raises(ConfigError):
        run(ExperimentConfig("attack-simon", params=SMALL_CONFIGS["attack-simon"]))


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"experiment": "hash-audit", "params": SMALL_CONFIGS["hash-audit"]})
    proc = subprocess.run([sys.executable, "-m", "qsga", "hash-audit", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["body"]["metrics"]["image"]["image_size"] <= 3
