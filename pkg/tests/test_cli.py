import json
import subprocess
import sys

import pytest

from eed2d.cli import main, parse_config_file, params_from_config
from eed2d.params import dbm_to_watts


def test_config_parsing(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        """
# scenario
k = 4
m = 10
p_max_dbm = 20.0   # budget
eta = 0.1
csi = "perfect"
flag = true
"""
    )
    parsed = parse_config_file(str(cfg))
    assert parsed["k"] == 4
    assert parsed["p_max_dbm"] == 20.0
    assert parsed["csi"] == "perfect"
    assert parsed["flag"] is True
    params = params_from_config(parsed)
    assert params.k == 4
    assert params.p_max == pytest.approx(dbm_to_watts(20.0))


def test_dbm_conversion_examples():
    assert dbm_to_watts(20.0) == pytest.approx(0.1)
    assert dbm_to_watts(-94.0) == pytest.approx(3.98e-13, rel=1e-2)


def test_solve_command(tmp_path, capsys):
    cfg = tmp_path / "small.cfg"
    cfg.write_text("k = 2\nm = 2\n")
    code = main(["solve", "--config", str(cfg), "--seed", "3"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["feasible"] is True
    assert out["ee"] > 0


def test_sweep_command(tmp_path, capsys):
    cfg = tmp_path / "small.cfg"
    cfg.write_text("k = 2\nm = 2\n")
    out_csv = tmp_path / "table.csv"
    code = main(
        [
            "sweep",
            "--config",
            str(cfg),
            "--seed",
            "4",
            "--trials",
            "1",
            "--values",
            "15,20",
            "--out",
            str(out_csv),
            "--workers",
            "1",
        ]
    )
    assert code == 0
    assert out_csv.exists()
    assert (tmp_path / "table.gp").exists()
    summary = json.loads(capsys.readouterr().out)
    assert summary["rows"] == 2


def test_oracle_command(capsys):
    code = main(["oracle", "--seed", "3", "--grid", "80"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rel_gap"] < 0.02


def test_solve_infeasible_exit_code(tmp_path, capsys):
    # single-antenna downlink with gamma = 2^20 - 1: the stacked SIC
    # constraints need p_1 >= gamma^2 sigma^2 / |h_2|^2 >> p_max for any
    # channel draw, so the trial is infeasible almost surely
    cfg = tmp_path / "impossible.cfg"
    cfg.write_text("k = 2\nm = 1\nr_min = 20\n")
    code = main(["solve", "--config", str(cfg), "--seed", "1"])
    assert code == 2
    out = json.loads(capsys.readouterr().out)
    assert out["feasible"] is False


def test_error_exit_code(capsys):
    assert main(["solve", "--config", "/nonexistent/path.cfg"]) == 1


def test_console_script_serve_env_round_trip():
    proc = subprocess.run(
        [sys.executable, "-m", "eed2d.cli", "serve-env", "--seed", "2"],
        input='{"cmd":"reset","seed":2}\n{"cmd":"close"}\n',
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    lines = proc.stdout.splitlines()
    assert len(lines) == 2
    assert len(json.loads(lines[0])["state"]) == 25
    assert json.loads(lines[1]) == {"closed": True}
