import json
import subprocess
import sys

import pytest

from orthoprecoding.cli import main


def run(*args):
    return subprocess.run([sys.executable, "-m", "orthoprecoding", *args], capture_output=True, text=True)


def test_simulate(tmp_path):
    plan = {
        "frame": {"n_subcarriers": 16, "n_symbols": 12, "cp_length": 4, "n_pilot_symbols": 2},
        "scenarios": ["doubly-selective"],
        "bases": ["wht"],
        "ebn0_db": [4],
        "max_frames": 2,
    }
    cfg = tmp_path / "plan.json"
    cfg.write_text(json.dumps(plan))
    assert main(["simulate", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "out")]) == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert (tmp_path / "out" / "ber.csv").read_text().count("\n") == 4


def test_simulate_bad_config(tmp_path):
    cfg = tmp_path / "plan.yaml"
    cfg.write_text("bases: []\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) != 0
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml")]) != 0


def test_hardening(tmp_path, capsys):
    assert main(["hardening", "--out", str(tmp_path), "--frames", "5"]) == 0
    assert (tmp_path / "hardening_table.csv").exists()
    assert main(["hardening", "--out", str(tmp_path), "--frames", "-1"]) != 0


def test_selftest_subprocess(tmp_path):
    proc = run("selftest", "--seed", "1", "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    assert "selftest passed" in proc.stdout
    assert all(item["passed"] for item in json.loads((tmp_path / "selftest.json").read_text()))


def test_unknown_command():
    assert run("plot").returncode != 0
    with pytest.raises(SystemExit):
        main([])
