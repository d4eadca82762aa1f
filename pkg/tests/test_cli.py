"""Command-line interface: examples, files, exit codes, determinism."""

import json
import subprocess
import sys

import pytest

from iet3.cli import run_command


def run(args, tmp):
    return run_command(args + ["--out", str(tmp)])


def test_iet_info_example(tmp_path, capsys):
    code = run(["iet-info", "--l", "0.2,0.3,0.5"], tmp_path)
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["alpha"] == pytest.approx(0.8 / 1.3)
    assert out["kappa"] == pytest.approx(1 / 1.3)
    report = json.loads((tmp_path / "iet-info.json").read_text())
    assert report["tool"] == "iet3"
    assert "config" in report and "version" in report


def test_kr_example_two_atom(tmp_path, capsys):
    mu = tmp_path / "a.csv"
    nu = tmp_path / "b.csv"
    mu.write_text("x,y,w\n0.1,0.2,1\n", encoding="utf-8")
    nu.write_text("x,y,w\n0.4,0.2,1\n", encoding="utf-8")
    code = run(["kr", "--mu", str(mu), "--nu", str(nu)], tmp_path)
    assert code == 0
    assert float(capsys.readouterr().out.strip()) == pytest.approx(0.3)


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        run_command(["kr"])  # missing required files
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc2:
        run_command(["no-such-command"])
    assert exc2.value.code == 1


def test_orbit_and_joining_files(tmp_path):
    assert run(["orbit", "--l", "0.2,0.3,0.5", "--x", "0.1", "--length", "10"],
               tmp_path) == 0
    lines = (tmp_path / "orbit.csv").read_text().strip().splitlines()
    assert lines[0] == "i,x"
    assert len(lines) == 11
    assert run(["joining-sample", "--l", "0.2,0.3,0.5", "--power", "1",
                "--atoms", "100"], tmp_path) == 0
    body = (tmp_path / "joining.csv").read_text().splitlines()
    assert body[0] == "x,y,w"
    assert len(body) == 101


def test_renorm_find_report(tmp_path):
    assert run(["renorm-find", "--alpha-cf", "doc-switch", "--delta", "0.3",
                "--t-max", "11"], tmp_path) == 0
    rep = json.loads((tmp_path / "renorm-find.json").read_text())
    steps = [r["n_steps"] for r in rep["times"]]
    assert 4 in steps and 32001 in steps


def test_determinism_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        code = run_command(["weak-closure", "--alpha-cf", "doc-tower",
                            "--k", "1", "--horizon", "40", "--atoms", "1500",
                            "--seed", "7", "--out", str(out)])
        assert code == 0
    ra = (a / "weak-closure.json").read_bytes()
    rb = (b / "weak-closure.json").read_bytes()
    assert ra == rb


def test_schedule_determinism(tmp_path):
    outs = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        code = run_command(["schedule", "--alpha-cf", "doc-switch",
                            "--levels", "1", "--atoms", "1500",
                            "--samples", "300", "--eps", "0.025",
                            "--seed", "7", "--out", str(out)])
        assert code == 0
        outs.append((out / "schedule.json").read_bytes())
    assert outs[0] == outs[1]


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "iet3.cli", "iet-info", "--l", "0.2,0.3,0.5",
         "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "alpha" in proc.stdout


def test_golden_witness_deterministic_failure(tmp_path):
    # badly approximable rotation numbers abort the schedule; the failure
    # report is still byte-deterministic across runs
    outs = []
    for name in ("w1", "w2"):
        out = tmp_path / name
        code = run_command(["witness", "--alpha-cf", "golden",
                            "--kappa", "0.769230769", "--levels", "3",
                            "--atoms", "2000", "--seed", "7", "--out", str(out)])
        assert code == 2
        outs.append((out / "witness.json").read_bytes())
    assert outs[0] == outs[1]
