import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mricath import io
from mricath.cli import main
from mricath.estimation import PEBAX35, protocol_loads, synthesize_observations, three_sweep_protocol

FIELD45 = ",".join(repr(float(x)) for x in protocol_loads().b_field)


def _json(path):
    return json.loads(path.read_text())


def test_solve_straight(tmp_path):
    assert main(["solve", "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "solve.json")
    assert np.allclose(rep["tip"]["p"], [0, 0, 146.0]) and rep["converged"]


def test_solve_trace(tmp_path):
    assert main(["solve", "--out", str(tmp_path), "--currents", "0.1,0,-0.2", "--insert", "140", "--trace"]) == 0
    s = np.loadtxt(tmp_path / "trace.csv", delimiter=",", skiprows=1)[:, 0]
    assert np.all(np.diff(s) >= 0) and s[-1] == pytest.approx(140.0)


def test_solve_invalid_spec(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("segments:\n  - type: flexible\n    length: -3\n    youngs_modulus: 1\n    shear_modulus: 1\n")
    assert main(["solve", "--spec", str(bad), "--out", str(tmp_path)]) == 2
    err = _json(tmp_path / "error.json")
    assert err["error"] == "InputError" and any("length" in v for v in err["violations"])


def test_solve_bad_currents(tmp_path):
    assert main(["solve", "--out", str(tmp_path), "--currents", "0.1,0"]) == 2
    assert main(["solve", "--out", str(tmp_path), "--currents", "0.9,0,0"]) == 2


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("MRICATH_OUT", str(tmp_path / "env"))
    assert main(["solve"]) == 0
    assert (tmp_path / "env" / "solve.json").exists()


def test_track_circle(tmp_path):
    assert main(["track", "--shape", "circle", "--points", "24", "--out", str(tmp_path)]) == 0
    summ = _json(tmp_path / "summary.json")
    assert summ["rmse_model_vs_desired"] < 1e-3 and summ["waypoints_reached"] == 24
    assert {"mean_step_ms", "p95_step_ms"} <= set(summ)
    rows = list(csv.DictReader(open(tmp_path / "trajectory.csv")))
    assert len(rows) == 24 and "step_ms" not in rows[0]
    assert "step_ms" in open(tmp_path / "timing.csv").readline()


def test_track_repeats_identical(tmp_path):
    assert main(["track", "--shape", "butterfly", "--points", "16", "--repeats", "10", "--out", str(tmp_path)]) == 0
    files = sorted(tmp_path.glob("trajectory_*.csv"))
    assert len(files) == 10 and len({f.read_bytes() for f in files}) == 1
    assert _json(tmp_path / "summary.json")["repeats_identical"]


def test_track_unreachable(tmp_path):
    assert main(["track", "--size", "400", "--points", "8", "--max-inner", "3", "--out", str(tmp_path)]) == 3
    assert _json(tmp_path / "error.json")["error"] == "UnreachableWaypoint"
    assert (tmp_path / "trajectory.csv").exists()


def test_metrics_modes(tmp_path):
    rng = np.random.default_rng(0)
    des = rng.normal(size=(12, 3)) * 5
    ref = tmp_path / "des.csv"
    with open(ref, "w") as fh:
        fh.write("index,p_des_x,p_des_y,p_des_z\n")
        for i, p in enumerate(des):
            fh.write(f"{i},{float(p[0])!r},{float(p[1])!r},{float(p[2])!r}\n")
    same = []
    for k in range(10):
        f = tmp_path / f"same{k}.csv"
        io.write_trace_points(f, des)
        same.append(str(f))
    out = tmp_path / "m"
    assert main(["metrics", *same, "--mode", "method2", "--out", str(out)]) == 0
    rep = _json(out / "metrics.json")
    assert rep["mean"] == pytest.approx(0.0, abs=1e-12) and rep["variance"] == pytest.approx(0.0, abs=1e-20)
    off = tmp_path / "off.csv"
    io.write_trace_points(off, des + [2.0, -1.0, 0.5])
    assert main(["metrics", str(off), "--reference", str(ref), "--mode", "aligned", "--out", str(out)]) == 0
    assert _json(out / "metrics.json")["mean"] == pytest.approx(0.0, abs=1e-12)
    assert main(["metrics", str(off), "--reference", str(ref), "--mode", "raw", "--out", str(out)]) == 0
    assert _json(out / "metrics.json")["mean"] == pytest.approx(np.sqrt(5.25))
    short = tmp_path / "short.csv"
    io.write_trace_points(short, des[:5])
    assert main(["metrics", str(short), "--reference", str(ref), "--out", str(out)]) == 2
    assert main(["metrics", same[0], "--mode", "method2", "--out", str(out)]) == 2


@pytest.fixture(scope="module")
def obs_csv(tmp_path_factory, pebax):
    path = tmp_path_factory.mktemp("obs") / "obs.csv"
    obs = synthesize_observations(pebax, PEBAX35, three_sweep_protocol(pebax), protocol_loads())
    io.write_observations_csv(path, obs)
    return path


def test_estimate_recovers(tmp_path, obs_csv):
    init = tmp_path / "init.json"
    init.write_text(json.dumps({"E": 31.03 * 0.8, "G": 8.11 * 1.2}))
    assert main(["estimate", str(obs_csv), "--init", str(init), "--field", FIELD45, "--out", str(tmp_path)]) == 0
    fit = _json(tmp_path / "fit.json")
    assert fit["params"]["E"] == pytest.approx(31.03, rel=0.05) and fit["rmse_mm"] < 1e-3


def test_estimate_errors(tmp_path, obs_csv):
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,valid\nfile\n")
    assert main(["estimate", str(bad), "--out", str(tmp_path)]) == 2
    init = tmp_path / "init.json"
    init.write_text(json.dumps({"E": 20.0}))
    args = ["estimate", str(obs_csv), "--init", str(init), "--field", FIELD45, "--out", str(tmp_path)]
    assert main(args + ["--max-iter", "1"]) == 4
    assert _json(tmp_path / "fit.json")["converged"] is False
    assert main(args + ["--free", "E,Q"]) == 2


def test_bench(tmp_path):
    assert main(["bench", "--samples", "10", "--points", "8", "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "bench.json")
    assert rep["paper_reported"] == {"analytical_jacobian": 2.0, "fd_jacobian": 5.5,
                                     "control_step": 4.1, "fdm_control_step": 95.0}
    assert set(rep["control_step_ms"]) == {"circle", "lemniscate", "rectangle", "butterfly"}
    assert rep["speedup_median"] > 1.0 and rep["max_rel_deviation"] < 1e-3
    assert json.loads(json.dumps(rep)) == rep
    first = rep["inputs"]
    assert main(["bench", "--samples", "10", "--points", "8", "--out", str(tmp_path)]) == 0
    assert _json(tmp_path / "bench.json")["inputs"] == first
    assert main(["bench", "--samples", "5", "--out", str(tmp_path)]) == 2


def test_module_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "mricath.cli", "solve", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "tip_p" in r.stdout
