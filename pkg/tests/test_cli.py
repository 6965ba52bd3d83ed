import json
import os
import subprocess
import sys

import pytest

from pnrqec.cli import main


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.delenv("BQEC_OUT", raising=False)
    monkeypatch.chdir(tmp_path)
    return tmp_path / "out"


def run_json(capsys, argv):
    code = main(argv + ["--json"])
    return code, json.loads(capsys.readouterr().out)


def test_help_lists_subcommands():
    res = subprocess.run([sys.executable, "-m", "pnrqec", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("state", "fidelity", "optimize-loss", "optimize-dephasing", "reproduce", "feasibility"):
        assert cmd in res.stdout


def test_state_from_scheme(capsys, out):
    code, rep = run_json(capsys, ["state", "--m", "2", "--scheme-s1-db", "2", "--scheme-s2-db", "-3", "--t", "0.08"])
    assert code == 0
    assert abs(rep["r"] + 0.30) <= 0.01
    assert abs((rep["z"] + 7.14) / 7.14) <= 0.04


def test_state_from_rz_text(capsys, out):
    assert main(["state", "--m", "2", "--r", "0.3", "--z=-0.5"]) == 0
    text = capsys.readouterr().out
    assert "dB" in text
    assert not out.exists()


def test_state_wigner_files(capsys, out):
    assert main(["state", "--m", "3", "--r", "0.2", "--z", "0.4", "--wigner-grid", "9", "--out", str(out)]) == 0
    names = os.listdir(out)
    assert any(n.endswith(".csv") for n in names)
    assert any(n.endswith(".manifest.json") for n in names)


def test_usage_errors(capsys, out):
    assert main(["state", "--m", "2", "--r", "0.3"]) == 2
    assert main(["state", "--m", "2", "--r", "0.3", "--z", "0.1", "--t", "0.2"]) == 2
    assert main(["fidelity", "--m", "2", "--word0", "0.3,0.1", "--word1", "0.2,0.4", "--gamma", "0.1"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["state"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == 2


def test_fidelity_rotated(capsys, out):
    code, rep = run_json(capsys, ["fidelity", "--m", "2", "--mean-n", "2", "--rotated", "--gamma", "0.1"])
    assert code == 0
    assert 0.9 < rep["fidelity"] < 1.0
    assert rep["orthogonality_residual"] < 1e-8


def test_fidelity_identity_channel(capsys, out):
    code, rep = run_json(capsys, ["fidelity", "--m", "2", "--mean-n", "2", "--rotated"])
    assert code == 0
    assert rep["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_fidelity_forced_overlap(capsys, out):
    code, rep = run_json(
        capsys, ["fidelity", "--m", "2", "--word0", "0.3,0.1", "--word1", "0.2,0.4", "--gamma", "0.1", "--force"]
    )
    assert code == 0
    assert rep["orthogonality_residual"] > 1e-3


def test_feasibility(capsys, out):
    code, rep = run_json(capsys, ["feasibility", "--m", "2", "--mean-n", "2", "--rotated"])
    assert code == 0
    assert 0 < rep["p_cw"] < 1
    assert "dB" in rep["db_convention"]


def test_optimize_loss_single_point(capsys, out):
    argv = ["optimize-loss", "--m", "2", "--gamma", "0.1", "--mean-n", "2", "--out", str(out)]
    assert main(argv) == 0
    csvs = sorted(p for p in os.listdir(out) if p.endswith(".csv"))
    assert csvs
    first = (out / csvs[0]).read_bytes()
    manifest = json.loads((out / [p for p in os.listdir(out) if p.endswith(".manifest.json")][0]).read_text())
    assert manifest["subcommand"] == "optimize-loss"
    assert manifest["search_configs"][0]["gamma"] == 0.1
    assert main(argv) == 0
    assert (out / csvs[0]).read_bytes() == first
    lines = first.decode().splitlines()
    assert lines[0].startswith("#")
    header = next(line for line in lines if not line.startswith("#"))
    assert header.split(",")[0] == "mean_n"


def test_env_out_dir(capsys, tmp_path, monkeypatch):
    target = tmp_path / "envout"
    monkeypatch.setenv("BQEC_OUT", str(target))
    assert main(["reproduce", "tableB1"]) == 0
    assert (target / "tableB1.csv").exists()
    assert (target / "tableB1.manifest.json").exists()


def test_reproduce_bad_m(capsys, out):
    assert main(["reproduce", "fig2", "--m", "7"]) == 2


def test_total_failure_exit_code(capsys, out):
    # no orthogonal pair exists at this tiny <n> and r2
    assert main(["fidelity", "--m", "2", "--mean-n", "0.05", "--r2", "1.7", "--gamma", "0.1"]) == 1


def test_svg_output(capsys, out):
    pytest.importorskip("matplotlib")
    argv = ["optimize-dephasing", "--m", "2", "--gamma-phi", "0.05", "--mean-n", "2", "--out", str(out), "--svg"]
    assert main(argv) == 0
    assert any(p.endswith(".svg") for p in os.listdir(out))
