import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from twolocus import cli
from twolocus.config import parse_config
from twolocus.errors import ConfigError
from twolocus.verify import TheoremReport

ENV = """
[grid]
L = 1.0
N = {n}

[environment.alpha]
type = "step"
levels = [-1.0, 1.0]
breakpoints = [0.6]

[environment.beta]
type = "step"
levels = [-1.0, 1.0]
breakpoints = [0.7]
"""

BASE = ENV + """
[params]
lambda = 15.0
rho = 1.0

[initial]
type = "uniform"
freqs = [0.0, 0.5, 0.5, 0.0]

[run]
t_max = 2.0
sample_times = [0.0, 0.1, 1.0]

[eigen]
weight = "alpha"

[equilibrium]
kind = "internal"

[stability]
k = 4

[sweep]
rho = [50.0, 100.0, 200.0]
task = "stability"
"""


def write(tmp_path, text, name="run.toml", n=65):
    path = tmp_path / name
    path.write_text(text.replace("{n}", str(n)))
    return path


def run(argv):
    return cli.main(["-q", *map(str, argv)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# config


def test_minimal_config_valid(tmp_path):
    text = ENV + "\n[params]\nlambda = 5.0\nrho = 0.0\n"
    cfg = parse_config(write(tmp_path, text, n=257))
    assert cfg.grid.n_nodes == 257
    assert (cfg.params.lam, cfg.params.rho) == (5.0, 0.0)


def test_both_parameterizations_conflict(tmp_path):
    text = ENV + "\n[params]\nlambda = 5.0\nrho = 0.0\nd = 1.0\ns = 2.0\nr = 0.5\n"
    with pytest.raises(ConfigError) as info:
        parse_config(write(tmp_path, text))
    assert any("both" in e or "conflict" in e for e in info.value.errors)


def test_raw_parameterization(tmp_path):
    text = ENV + "\n[params]\nd = 0.5\ns = 2.0\nr = 1.0\n"
    cfg = parse_config(write(tmp_path, text))
    assert (cfg.params.lam, cfg.params.rho) == (4.0, 2.0)


def test_sweep_resolves_three_runs(tmp_path):
    cfg = parse_config(write(tmp_path, BASE))
    assert cfg.resolved_runs() == [(0, 15.0, 50.0), (1, 15.0, 100.0), (2, 15.0, 200.0)]


def test_sweep_order_lexicographic(tmp_path):
    text = BASE.replace('rho = [50.0, 100.0, 200.0]', 'lambda = [10.0, 20.0]\nrho = [1.0, 2.0]')
    cfg = parse_config(write(tmp_path, text))
    assert [r[1:] for r in cfg.resolved_runs()] == [(10.0, 1.0), (10.0, 2.0), (20.0, 1.0),
                                                   (20.0, 2.0)]


@pytest.mark.parametrize("patch", [
    ("[grid]\n", "[grid]\nbogus = 1\n"),
    ("[run]\n", "[run]\ncolour = 'red'\n"),
    ("[stability]\n", "[stabilty]\nk = 1\n[stability]\n"),
])
def test_unknown_keys_rejected(tmp_path, patch):
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, BASE.replace(*patch)))


def test_sweep_axes_sorted(tmp_path):
    cfg = parse_config(write(tmp_path, BASE.replace("[50.0, 100.0, 200.0]", "[100.0, 50.0]")))
    assert cfg.sweep["rho"] == [50.0, 100.0]


def test_nonfinite_sweep_rejected(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, BASE.replace("[50.0, 100.0, 200.0]", "[50.0, inf]")))


def test_errors_are_itemized(tmp_path):
    text = BASE.replace("[grid]\n", "[grid]\nbogus = 1\n").replace("rho = 1.0", "rho = 1.0\nd = 1.0")
    with pytest.raises(ConfigError) as info:
        parse_config(write(tmp_path, text))
    assert len(info.value.errors) >= 2


# ---------------------------------------------------------------------------
# commands


def test_eigen_json_fields(tmp_path, capsys):
    out = tmp_path / "eig"
    assert run(["eigen", "-c", write(tmp_path, BASE), "-o", out]) == 0
    rec = json.loads((out / "eigen.json").read_text())
    for key in ("lambda_star", "lambda_0", "lambda_h", "mu1", "eigenvalues"):
        assert key in rec
    assert rec["weight"] == "alpha"
    # step weight at N=65: close to the continuum root
    assert rec["lambda_star"] == pytest.approx(2.5576, rel=2e-3)
    assert json.loads(capsys.readouterr().out)["lambda_star"] == rec["lambda_star"]


def test_simulate_outputs_and_positivity(tmp_path):
    out = tmp_path / "sim"
    assert run(["simulate", "-c", write(tmp_path, BASE), "-o", out]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"manifest.json", "profile_0.0.csv", "profile_0.1.csv", "profile_1.0.csv",
            "profile_final.csv", "diagnostics.csv", "simulate.json"} <= names
    rows = read_csv(out / "profile_0.1.csv")
    assert list(rows[0]) == list(cli.PROFILE_COLUMNS)
    p = np.array([[float(r[f"p{i}"]) for r in rows] for i in range(1, 5)])
    # gametes 1 and 4 start at zero and are created by recombination
    assert p.min() > 0
    diag = read_csv(out / "diagnostics.csv")
    assert list(diag[0]) == list(cli.DIAGNOSTIC_COLUMNS)


def test_simulate_vertex_stays_fixed(tmp_path):
    text = BASE.replace('type = "uniform"\nfreqs = [0.0, 0.5, 0.5, 0.0]', 'type = "vertex"\nindex = 2')
    out = tmp_path / "v2"
    assert run(["simulate", "-c", write(tmp_path, text), "-o", out]) == 0
    rows = read_csv(out / "profile_final.csv")
    assert all(float(r["p2"]) == 1.0 and float(r["p1"]) == 0.0 for r in rows)


def test_equilibrium_and_stability(tmp_path):
    path = write(tmp_path, BASE)
    assert run(["equilibrium", "-c", path, "-o", tmp_path / "eq"]) == 0
    rec = json.loads((tmp_path / "eq" / "equilibrium.json").read_text())
    assert rec["class"] == "internal" and rec["residual"] <= 1e-10
    assert run(["stability", "-c", path, "-o", tmp_path / "st"]) == 0
    rec = json.loads((tmp_path / "st" / "stability.json").read_text())
    assert rec["verdict"] in ("stable", "unstable", "marginal")


def test_sweep_rows(tmp_path):
    out = tmp_path / "sw"
    assert run(["sweep", "-c", write(tmp_path, BASE), "-o", out]) == 0
    rows = read_csv(out / "sweep.csv")
    assert [float(r["rho"]) for r in rows] == [50.0, 100.0, 200.0]


def test_manifest_checksums(tmp_path):
    out = tmp_path / "m"
    run(["simulate", "-c", write(tmp_path, BASE), "-o", out])
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["exit_code"] == 0
    assert man["config"]["input"]["params"]["lambda"] == 15.0
    for entry in man["outputs"]:
        data = (out / entry["name"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
        assert len(data) == entry["bytes"]
    assert json.loads((out / "simulate.json").read_text())["manifest"] == "manifest.json"


def _tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_deterministic_outputs(tmp_path):
    path = write(tmp_path, BASE)
    for cmd in ("simulate", "sweep"):
        run([cmd, "-c", path, "-o", tmp_path / f"{cmd}1"])
        run([cmd, "-c", path, "-o", tmp_path / f"{cmd}2"])
        assert _tree(tmp_path / f"{cmd}1") == _tree(tmp_path / f"{cmd}2")


def test_sweep_parallel_matches_serial(tmp_path, monkeypatch):
    path = write(tmp_path, BASE)
    monkeypatch.setenv("WORKER_COUNT", "1")
    run(["sweep", "-c", path, "-o", tmp_path / "serial"])
    monkeypatch.setenv("WORKER_COUNT", "3")
    run(["sweep", "-c", path, "-o", tmp_path / "parallel"])
    assert _tree(tmp_path / "serial") == _tree(tmp_path / "parallel")


# ---------------------------------------------------------------------------
# exit codes


def test_exit_config_error(tmp_path):
    text = BASE.replace("[grid]\n", "[grid]\nbogus = 1\n")
    out = tmp_path / "bad"
    assert run(["simulate", "-c", write(tmp_path, text), "-o", out]) == cli.EXIT_CONFIG == 2
    err = json.loads((out / "errors.json").read_text())
    assert err["exit_code"] == 2 and err["errors"][0]["items"]


def test_exit_missing_file(tmp_path):
    assert run(["eigen", "-c", tmp_path / "nope.toml", "-o", tmp_path / "o"]) == 2


def test_exit_numerical_failure(tmp_path):
    # explicit step far beyond the stability limit: the invariant guard rejects it
    text = BASE.replace("t_max = 2.0", "t_max = 2.0\ndt = 50.0")
    out = tmp_path / "num"
    assert run(["simulate", "-c", write(tmp_path, text), "-o", out]) == cli.EXIT_NUMERICAL == 1
    err = json.loads((out / "errors.json").read_text())
    assert err["errors"][0]["type"] == "StepRejectedError"
    assert json.loads((out / "manifest.json").read_text())["status"] == "failed"


def test_exit_absent_equilibrium(tmp_path):
    text = BASE.replace('kind = "internal"', 'kind = "edge"\ngametes = [2, 3]')
    assert run(["stability", "-c", write(tmp_path, text), "-o", tmp_path / "o"]) == 1


def _fake_suite(verdict):
    def fake(suite, cfg):
        return [TheoremReport("fake", "scenario", verdict, {"ok": verdict == "pass"})]
    return fake


@pytest.mark.parametrize("verdict,code", [("pass", 0), ("inconclusive", 0), ("fail", 3)])
def test_verify_exit_codes(tmp_path, monkeypatch, verdict, code):
    monkeypatch.setattr(cli, "run_suite", _fake_suite(verdict))
    out = tmp_path / "v"
    assert run(["verify", "no-recombination", "-o", out]) == code
    rows = read_csv(out / "verify_summary.csv")
    assert rows[0]["verdict"] == verdict


def test_verify_strong_recombination_end_to_end(tmp_path):
    out = tmp_path / "ver"
    assert run(["verify", "strong-recombination", "-o", out]) == 0
    rep = json.loads((out / "report_strong-recombination.json").read_text())
    m = rep["reports"][0]["measured"]
    assert -1.2 <= m["slope_vs_rho"] <= -0.8
    row = read_csv(out / "verify_summary.csv")[0]
    assert row["verdict"] == "pass" and float(row["slope"]) == m["slope_vs_rho"]


def test_verify_unknown_suite(tmp_path):
    assert run(["verify", "bogus", "-o", tmp_path / "o"]) == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "twolocus", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
