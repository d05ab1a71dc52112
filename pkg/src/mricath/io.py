"""CSV and JSON readers/writers for trajectories, timing, traces and observations."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .estimation import Observation, ObservationSet
from .model import ActuationInput


class InputFormatError(ValueError):
    pass


def _fmt(x):
    return repr(float(x))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def trajectory_header(n_inputs):
    cols = ["index", "p_des_x", "p_des_y", "p_des_z", "p_model_x", "p_model_y", "p_model_z"]
    cols += [f"z_{k}" for k in range(n_inputs - 1)] + ["z_insert", "inner_iters"]
    return cols


def write_trajectory_csv(path, result):
    """One row per waypoint; values written with full float precision."""
    n = result.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(n))
        for wp in result.waypoints:
            w.writerow([wp.index, *map(_fmt, wp.p_des), *map(_fmt, wp.p_model),
                        *map(_fmt, wp.z), wp.inner_iters])


def write_timing_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "waypoint", "bvp_iterations", "step_ms"])
        for k, s in enumerate(result.steps):
            w.writerow([k, s.waypoint, s.bvp_iterations, f"{s.wall_ms:.6f}"])


def write_trace_points(path, points):
    """Observed-trace format: index, p_obs_x, p_obs_y, p_obs_z."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "p_obs_x", "p_obs_y", "p_obs_z"])
        for i, p in enumerate(np.asarray(points, dtype=float)):
            w.writerow([i, *map(_fmt, p)])


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc.strerror}") from exc
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    return rows


def read_points(path, prefix=None):
    """Read a point list from an observed-trace or trajectory CSV.

    Without ``prefix`` the first of p_obs, p_model, p_des present is used.
    """
    rows = _read_rows(path)
    keys = rows[0].keys()
    candidates = [prefix] if prefix else ["p_obs", "p_model", "p_des"]
    for pre in candidates:
        cols = [f"{pre}_{a}" for a in "xyz"]
        if all(c in keys for c in cols):
            try:
                rows.sort(key=lambda r: int(r["index"]))
                return np.array([[float(r[c]) for c in cols] for r in rows])
            except (KeyError, TypeError, ValueError) as exc:
                raise InputFormatError(f"{path}: bad value ({exc})") from exc
    raise InputFormatError(f"{path}: expected columns {candidates[0]}_x/y/z")


OBS_COLUMNS = ["record_id", "i1", "i2", "i3", "insert_mm", "px", "py", "pz"]


def write_observations_csv(path, observations: ObservationSet):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(OBS_COLUMNS)
        for rec in observations.records:
            if rec.z.currents.shape[0] != 1:
                raise ValueError("observation CSV holds a single actuator")
            w.writerow([rec.record_id, *map(_fmt, rec.z.currents[0]), _fmt(rec.z.inserted_length),
                        *map(_fmt, rec.p_obs)])


def read_observations_csv(path) -> ObservationSet:
    rows = _read_rows(path)
    missing = [c for c in OBS_COLUMNS if c not in rows[0]]
    if missing:
        raise InputFormatError(f"{path}: missing columns {missing}")
    recs = []
    for line, r in enumerate(rows, start=2):
        try:
            cur = np.array([[float(r["i1"]), float(r["i2"]), float(r["i3"])]])
            p = np.array([float(r["px"]), float(r["py"]), float(r["pz"])])
            recs.append(Observation(ActuationInput(cur, float(r["insert_mm"])), p,
                                    int(r["record_id"])))
        except (TypeError, ValueError) as exc:
            raise InputFormatError(f"{path}:{line}: {exc}") from exc
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(cur)):
            raise InputFormatError(f"{path}:{line}: non-finite value")
    return ObservationSet(recs)
