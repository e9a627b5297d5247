"""Command-line interface: exit codes, outputs, config handling and
determinism."""
import csv
import json
import math
import os
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "cyclicwave.cli"]


def run(args, cwd, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(CLI + args, cwd=cwd, env=env,
                          capture_output=True, text=True)


def chart_args(out, extra=()):
    return ["stability-chart", "--epsilon", "0.5", "--n", "3",
            "--lambda-min", "5", "--lambda-max", "17",
            "--grid", "200", "--out", out, *extra]


def test_stability_chart_outputs(tmp_path):
    r = run(chart_args("chart.csv"), tmp_path)
    assert r.returncode == 0, r.stderr
    rows = list(csv.reader((tmp_path / "chart.csv").open()))
    assert rows[0] == ["lambda", "trace", "abs_trace", "class"]
    assert len(rows) == 201
    side = json.loads((tmp_path / "chart.json").read_text())
    assert len(side["intervals"]) == 1
    iv = side["intervals"][0]
    assert iv["lambda_lo"] == pytest.approx(5.917536903266331, rel=1e-8)
    assert iv["lambda_hi"] == pytest.approx(16.14912452889447, rel=1e-8)
    assert iv["max_abs_trace"] > 2.001


def test_determinism_across_threads(tmp_path):
    run(chart_args("a.csv"), tmp_path, {"CYCLICWAVE_THREADS": "1"})
    run(chart_args("b.csv"), tmp_path, {"CYCLICWAVE_THREADS": "4"})
    run(chart_args("c.csv"), tmp_path, {"CYCLICWAVE_THREADS": "1"})
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    assert a == (tmp_path / "c.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_invalid_threads_env(tmp_path):
    r = run(chart_args("x.csv"), tmp_path, {"CYCLICWAVE_THREADS": "zero"})
    assert r.returncode == 2
    err = json.loads(r.stderr.strip())
    assert err["error"] == "ParameterError"


def test_validation_exit_code(tmp_path):
    r = run(["stability-chart", "--epsilon", "1.5", "--out", "x.csv"],
            tmp_path)
    assert r.returncode == 2
    err = json.loads(r.stderr.strip())
    assert err["error"] == "ParameterError"
    assert not (tmp_path / "x.csv").exists()


def test_config_overlay_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epsilon": 0.5, "lambda-min": 5.0,
                               "lambda-max": 6.0, "grid": 150}))
    # explicit flag must beat the config value for lambda-max
    r = run(["stability-chart", "--config", str(cfg), "--lambda-max", "17",
             "--out", "c.csv"], tmp_path)
    assert r.returncode == 0, r.stderr
    side = json.loads((tmp_path / "c.json").read_text())
    # edge refinement width scales with the coarser config grid of 150
    assert side["intervals"][0]["lambda_hi"] == pytest.approx(
        16.14912452889447, abs=2e-4)


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epsilonn": 0.5}))
    r = run(["stability-chart", "--config", str(cfg), "--out", "c.csv"],
            tmp_path)
    assert r.returncode == 2
    assert "epsilonn" in json.loads(r.stderr.strip())["message"]


def test_geodesic_matches_closed_form(tmp_path):
    r = run(["geodesic", "--metric", "conformal:alpha=-1,m=2",
             "--u0", "0,0", "--direction", "1,1", "--s-max", "3",
             "--out", "geo.csv"], tmp_path)
    assert r.returncode == 0, r.stderr
    rows = list(csv.reader((tmp_path / "geo.csv").open()))
    header, body = rows[0], rows[1:]
    assert header[0] == "s"
    for row in body[:: len(body) // 10]:
        s = float(row[0])
        assert float(row[1]) == pytest.approx(math.sinh(s) / math.sqrt(2),
                                              abs=1e-6)


def test_noc_verdicts(tmp_path):
    r = run(["noc", "--f", "example1:alpha=-1", "--out", "v.json"], tmp_path)
    assert r.returncode == 0, r.stderr
    v = json.loads((tmp_path / "v.json").read_text())
    assert v["holds"] == "no"
    r = run(["noc", "--f", "example1:alpha=-0.25"], tmp_path)
    assert r.returncode == 0
    assert json.loads(r.stdout.strip())["holds"] == "yes"
    r = run(["noc", "--f", "example2:ell=4"], tmp_path)
    assert json.loads(r.stdout.strip())["holds"] == "no"
    r = run(["noc", "--f", "nosuch:alpha=1"], tmp_path)
    assert r.returncode == 2


def test_blowup_demo_full_run(tmp_path):
    r = run(["blowup-demo", "--metric", "conformal:alpha=-1,m=2",
             "--direction", "1,1", "--lambda-min", "5", "--lambda-max", "17",
             "--out", "cert.json"], tmp_path)
    assert r.returncode == 0, r.stderr
    cert = json.loads((tmp_path / "cert.json").read_text())
    assert cert["M"] == 35
    assert cert["b_G"] == pytest.approx(math.pi / (2 * math.sqrt(2)),
                                        abs=1e-8)
    assert cert["t_star"] == pytest.approx(32.1072635173914, rel=1e-6)
    assert cert["smallness"] <= cert["delta"]


def test_blowup_demo_noc_holds_exit_4(tmp_path):
    r = run(["blowup-demo", "--metric", "conformal:alpha=-0.4,m=2",
             "--direction", "1,1", "--out", "c.json"], tmp_path)
    assert r.returncode == 4
    assert json.loads(r.stderr.strip())["error"] == "NotApplicableError"


def test_blowup_demo_not_distinguished_exit_5(tmp_path):
    r = run(["blowup-demo", "--metric", "halfplane:ell=4",
             "--direction", "1,0", "--out", "c.json"], tmp_path)
    assert r.returncode == 5
    assert json.loads(r.stderr.strip())["error"] == "NotDistinguishedError"


def test_blowup_demo_no_instability_exit_3(tmp_path):
    # a purely stable lambda window: the certificate search must fail with
    # a numerical (search) error, not crash
    r = run(["blowup-demo", "--metric", "conformal:alpha=-1,m=2",
             "--direction", "1,1", "--lambda-min", "1", "--lambda-max", "4",
             "--out", "c.json"], tmp_path)
    assert r.returncode == 3, (r.returncode, r.stderr)


def test_simulate_uniform(tmp_path):
    r = run(["simulate", "--mode", "uniform", "--epsilon", "0.5", "--n", "3",
             "--f", "example1:alpha=-1", "--t-end", "2", "--u0-val", "0",
             "--u1-val", "1", "--out", "u.csv"], tmp_path)
    assert r.returncode == 0, r.stderr
    rows = list(csv.reader((tmp_path / "u.csv").open()))
    assert rows[0] == ["t", "u"]
    # this run crosses the finite endpoint: last value is huge
    assert abs(float(rows[-1][1])) > 1e6


def test_simulate_linear_grid(tmp_path):
    r = run(["simulate", "--mode", "linear", "--epsilon", "0.5",
             "--t-end", "1", "--points", "64", "--amplitude", "0.01",
             "--k", "1", "--out", "lin.csv"], tmp_path)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "lin.csv").exists()
    man = json.loads((tmp_path / "lin.json").read_text())
    assert man["termination"] == "completed"
