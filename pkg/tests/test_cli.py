import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from kldsel.cli import main, read_observations
from kldsel.errors import DomainError
from kldsel.rng import stream
from kldsel.simulate import ExperimentConfig, run_experiment, sample_mixture


@pytest.fixture
def data(tmp_path):
    x = sample_mixture(1.0, 150, stream(3))
    path = tmp_path / "data.csv"
    path.write_text("count\n# drawn from Poisson(9)\n" + "\n".join(str(int(v)) for v in x) + "\n")
    return path


def run(argv, monkeypatch, cwd):
    monkeypatch.chdir(cwd)
    return main([str(a) for a in argv])


def test_read_observations(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("value\n1.5\n\n# note\n2 # trailing\n-3e0\n")
    assert read_observations(str(p)).tolist() == [1.5, 2.0, -3.0]
    p.write_text("1\n2\noops\n")
    with pytest.raises(DomainError, match="line 3"):
        read_observations(str(p))
    p.write_text("# only a comment\n")
    with pytest.raises(DomainError):
        read_observations(str(p))


def test_density_csv(data, tmp_path, monkeypatch):
    assert run(["density", "--input", data, "--bandwidth", "mcv", "--grid", 512, "--out", "est.csv"],
               monkeypatch, tmp_path) == 0
    with open(tmp_path / "est.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["x", "f_classical", "f_bias_reduced"]
    assert len(rows) == 512
    x = np.array([float(r["x"]) for r in rows])
    fb = np.array([float(r["f_bias_reduced"]) for r in rows])
    assert np.trapezoid(fb, x) == pytest.approx(1.0, abs=1e-2)
    manifest = json.loads((tmp_path / "est.csv.manifest.json").read_text())["manifest"]
    assert manifest["command"] == "density"
    assert manifest["outputs"] == ["est.csv", "est.csv.manifest.json"]
    assert b"\r\n" not in (tmp_path / "est.csv").read_bytes()


def test_simulate_matches_library(tmp_path, monkeypatch):
    argv = ["simulate", "--pi", "1.0", "--n", "250", "--reps", "20", "--alpha", "0.05",
            "--seed", "42", "-B", "200", "--out", "report.json"]
    assert run(argv, monkeypatch, tmp_path) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert set(doc) == {"manifest", "config", "results"}
    sel = doc["results"]["selection_percent"]
    assert sum(sel.values()) == pytest.approx(100.0, abs=0.1)
    lib = run_experiment(ExperimentConfig(pi=1.0, n=250, reps=20, alpha=0.05, seed=42, B=200))
    assert sel["model_1"] == pytest.approx(lib.selection["model_1"])
    assert doc["results"]["summary"]["lambda_hat"]["mean"] == pytest.approx(
        lib.summary["lambda_hat"]["mean"], rel=1e-8)
    m = doc["manifest"]
    assert m["seed"] == 42 and m["version"] and m["started_at"] and m["finished_at"]


def test_kld_bad_line(tmp_path, monkeypatch, capsys):
    p = tmp_path / "data.csv"
    p.write_text("x\n3\n4\nseven\n5\n")
    assert run(["kld", "--input", p, "--model", "poisson", "--out", "d.json"], monkeypatch, tmp_path) == 2
    assert "line 4" in capsys.readouterr().err
    assert not (tmp_path / "d.json").exists()


def test_kld_report(data, tmp_path, monkeypatch):
    assert run(["kld", "--input", data, "--model", "poisson", "--out", "d.json", "--no-timestamp"],
               monkeypatch, tmp_path) == 0
    res = json.loads((tmp_path / "d.json").read_text())["results"]
    assert res["divergence"] >= 0 and res["n_divergence"] == pytest.approx(150 * res["divergence"], rel=1e-8)
    assert len(res["cells"]) == 8


def test_nine_significant_digits(data, tmp_path, monkeypatch):
    run(["bandwidth", "--input", data, "--out", "b.json"], monkeypatch, tmp_path)
    res = json.loads((tmp_path / "b.json").read_text())["results"]
    for v in (res["mcv"]["h"], res["mcv"]["objective"], res["cv"]["search_hi"]):
        assert v == float(f"{v:.9g}")


@pytest.mark.parametrize("cmd", [["gof", "--model", "geometric", "-B", "200"],
                                 ["select", "-B", "200"], ["hist"], ["bandwidth"]])
def test_other_commands(cmd, data, tmp_path, monkeypatch):
    assert run(cmd[:1] + ["--input", data] + cmd[1:] + ["--out", "r.json"], monkeypatch, tmp_path) == 0
    assert json.loads((tmp_path / "r.json").read_text())["results"]


def test_select_prefers_poisson(data, tmp_path, monkeypatch):
    run(["select", "--input", data, "-B", "200", "--out", "s.json"], monkeypatch, tmp_path)
    assert json.loads((tmp_path / "s.json").read_text())["results"]["decision"] == "model_1"


def test_rate_command(tmp_path, monkeypatch):
    assert run(["rate", "--n-list", "100,200,400,800", "--reps", "200", "--out", "r.csv"],
               monkeypatch, tmp_path) == 0
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "kind,n,mse" and len(lines) == 9


def test_stdout_csv(data, tmp_path, monkeypatch, capsys):
    assert run(["kld", "--input", data, "--model", "geometric", "--format", "csv"], monkeypatch, tmp_path) == 0
    out = capsys.readouterr().out
    assert out.startswith("statistic,value\n") and "\ndivergence," in out


@pytest.mark.parametrize("argv", [[], ["bogus"], ["density"], ["kld", "--input", "x", "--model", "normal"],
                                  ["simulate", "--pi", "1", "--n", "5", "--wat"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    err = capsys.readouterr().err
    assert "usage:" in err


def test_domain_and_parameter_errors(tmp_path, monkeypatch, capsys):
    assert run(["simulate", "--pi", "2", "--n", "10"], monkeypatch, tmp_path) == 2
    assert run(["kld", "--input", "missing.csv", "--model", "poisson"], monkeypatch, tmp_path) == 2
    p = tmp_path / "neg.csv"
    p.write_text("-1\n2\n3\n")
    assert run(["kld", "--input", p, "--model", "poisson"], monkeypatch, tmp_path) == 2


def test_numeric_error_exit_code(tmp_path, monkeypatch):
    import kldsel.simulate as sim
    monkeypatch.setattr(sim, "sample_mixture", lambda pi, n, rng: np.ones(n))
    assert run(["simulate", "--pi", "0", "--n", "10", "--reps", "3", "-B", "100"], monkeypatch, tmp_path) == 3


def simulate_bytes(tmp_path, sub, env_threads):
    d = tmp_path / sub
    d.mkdir()
    env = {"KLDSEL_THREADS": env_threads, "PATH": ""}
    subprocess.run([sys.executable, "-m", "kldsel.cli", "simulate", "--pi", "0.5", "--n", "80",
                    "--reps", "8", "-B", "100", "--seed", "9", "--no-timestamp", "--out", "rep.json"],
                   cwd=d, env=env, check=True)
    return (d / "rep.json").read_bytes()


def test_byte_identical_across_threads(tmp_path):
    a = simulate_bytes(tmp_path, "one", "1")
    b = simulate_bytes(tmp_path, "three", "3")
    c = simulate_bytes(tmp_path, "again", "1")
    assert a == b == c
    assert b'"started_at": null' in a


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "kldsel" in capsys.readouterr().out
