"""Command-line entry point: ``mricath {solve,track,metrics,estimate,bench}``.

Exit codes: 0 success, 2 input error, 3 tracking failure, 4 non-convergence.
Every command writes into the output directory (``--out``, else the
``MRICATH_OUT`` environment variable, else ``./mricath_out``). On failure an
``error.json`` is written there and echoed on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .bvp import BvpNotConverged, solve_bvp
from .config import load_spec
from .control import IKConfig, UnreachableWaypoint, track_trajectory
from .estimation import (PARAM_NAMES, PEBAX35, QOSINA, ParameterSet, AllRecordsFailed,
                         estimate_parameters)
from .ivp import DEFAULT_STEPS_PER_MM, NonFiniteStateError, integrate_ivp, write_trace_csv
from .jacobians import PAPER_REPORTED_MS, bench_jacobians
from .metrics import accuracy_table, method1_table, method2_table
from .model import ActuationInput, ExternalLoads, SpecError
from .trajectories import SHAPES, generate_trajectory, workspace_plane

EXIT_OK, EXIT_INPUT, EXIT_TRACK, EXIT_NONCONV = 0, 2, 3, 4
OUT_ENV = "MRICATH_OUT"


class InputError(Exception):
    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


def _vec(text, n=None, name="value"):
    try:
        v = np.array([float(x) for x in text.split(",")], dtype=float)
    except ValueError:
        raise InputError(f"{name}: expected comma-separated numbers, got {text!r}")
    if n is not None and v.size != n:
        raise InputError(f"{name}: expected {n} numbers, got {v.size}")
    return v


def _out_dir(args):
    d = Path(args.out or os.environ.get(OUT_ENV) or "mricath_out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _spec(args):
    try:
        return load_spec(args.spec)
    except SpecError as exc:
        raise InputError("invalid catheter spec", exc.violations)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot load spec {args.spec!r}: {exc}")


def _loads(args):
    return ExternalLoads(f_tip=_vec(args.tip_force, 3, "--tip-force"),
                         gravity=_vec(args.gravity, 3, "--gravity"),
                         b_field=_vec(args.field, 3, "--field"))


def _seed(args):
    if not 0 <= args.seed < 2**64:
        raise InputError("--seed must be a 64-bit unsigned value")
    return args.seed


def _inputs(args, spec):
    cur = np.zeros((spec.n_actuators, 3))
    if args.currents:
        cur = _vec(args.currents, 3 * spec.n_actuators, "--currents").reshape(-1, 3)
    z = ActuationInput(cur, spec.total_length if args.insert is None else args.insert)
    errs = z.check(spec)
    if errs:
        raise InputError("invalid actuation input", errs)
    return z


def cmd_solve(args):
    spec, loads = _spec(args), _loads(args)
    z = _inputs(args, spec)
    out = _out_dir(args)
    sol = solve_bvp(spec, loads, z, tol=args.tol, steps_per_mm=args.steps_per_mm,
                    jacobian="fd" if args.fd else "analytical", raise_on_failure=False)
    tip = sol.tip
    report = {"converged": bool(sol.converged), "iterations": sol.iterations,
              "residual_norm": float(sol.residual_norm), "u0_plus": sol.u0_plus.tolist(),
              "inputs": z.as_vector().tolist(),
              "tip": {"s": float(tip.s), "p": tip.p.tolist(), "R": tip.R.tolist(), "u": tip.u.tolist()}}
    io.write_json(out / "solve.json", report)
    if args.trace:
        res = integrate_ivp(spec, loads, z, sol.u0_plus, steps_per_mm=args.steps_per_mm, trace=True)
        write_trace_csv(res, out / "trace.csv")
    if not sol.converged:
        _error(out, "BvpNotConverged", f"residual {sol.residual_norm:.3e} after {sol.iterations} iterations")
        return EXIT_NONCONV
    print(json.dumps({"tip_p": report["tip"]["p"], "iterations": sol.iterations}))
    return EXIT_OK


def _track_once(spec, loads, args, cfg):
    sol = solve_bvp(spec, loads, ActuationInput.zeros(spec), steps_per_mm=args.steps_per_mm)
    center, Rp = workspace_plane(sol.tip.p, sol.tip.R, args.standoff)
    wps = generate_trajectory(args.shape, center, args.size, args.points, Rp)
    return track_trajectory(spec, loads, wps, cfg)


def _summary(result, args, seed):
    des, mod = result.desired, result.model_trace
    ms = result.step_ms()
    return {"shape": args.shape, "points": args.points, "seed": seed,
            "waypoints_reached": int(sum(w.converged for w in result.waypoints)),
            "rmse_model_vs_desired": float(np.sqrt(np.mean(np.sum((des - mod) ** 2, axis=1)))),
            "max_error_mm": float(max(w.error for w in result.waypoints)),
            "mean_step_ms": float(ms.mean()) if ms.size else 0.0,
            "p95_step_ms": float(np.percentile(ms, 95)) if ms.size else 0.0,
            "control_steps": int(ms.size)}


def cmd_track(args):
    spec, loads = _spec(args), _loads(args)
    seed = _seed(args)
    if args.points < 4:
        raise InputError("--points must be at least 4")
    out = _out_dir(args)
    cfg = IKConfig(damping=args.lam, tol=args.tol, jacobian="fd" if args.fd else "analytical",
                   steps_per_mm=args.steps_per_mm, max_inner=args.max_inner)
    traces = []
    for k in range(args.repeats):
        name = "trajectory.csv" if args.repeats == 1 else f"trajectory_{k:02d}.csv"
        try:
            result = _track_once(spec, loads, args, cfg)
        except UnreachableWaypoint as exc:
            io.write_trajectory_csv(out / name, exc.result)
            io.write_timing_csv(out / "timing.csv", exc.result)
            _error(out, "UnreachableWaypoint", str(exc), waypoint=exc.index)
            return EXIT_TRACK
        io.write_trajectory_csv(out / name, result)
        traces.append((out / name).read_bytes())
        if k == 0:
            io.write_timing_csv(out / "timing.csv", result)
            summary = _summary(result, args, seed)
    summary["repeats"] = args.repeats
    summary["repeats_identical"] = all(t == traces[0] for t in traces)
    io.write_json(out / "summary.json", summary)
    print(json.dumps({k: summary[k] for k in ("rmse_model_vs_desired", "mean_step_ms", "p95_step_ms")}))
    return EXIT_OK


def cmd_metrics(args):
    out = _out_dir(args)
    seed = _seed(args)
    try:
        traces = [io.read_points(p) for p in args.traces]
        ref = io.read_points(args.reference, "p_des") if args.reference else None
    except io.InputFormatError as exc:
        raise InputError(str(exc))
    if not traces:
        raise InputError("at least one trace file is required")
    lengths = {len(t) for t in traces} | ({len(ref)} if ref is not None else set())
    if len(lengths) != 1:
        raise InputError("trace length mismatch", [f"{p}: {len(t)} points"
                                                   for p, t in zip(args.traces, traces)])
    rng = np.random.default_rng(seed)
    try:
        if args.mode == "method2":
            table = method2_table(traces, rng)
        elif ref is None:
            raise InputError(f"--mode {args.mode} needs --reference")
        elif args.mode == "raw":
            table = accuracy_table(traces, ref)
        else:
            table = method1_table(traces, ref)
    except ValueError as exc:
        raise InputError(str(exc))
    report = {"mode": args.mode, "seed": seed, "files": [str(p) for p in args.traces], **table}
    io.write_json(out / "metrics.json", report)
    print(json.dumps({"mean": table["mean"], "variance": table["variance"]}))
    return EXIT_OK


def _param_set(text):
    base = {"pebax35": PEBAX35, "qosina": QOSINA}
    if text in base:
        return base[text]
    try:
        d = json.loads(Path(text).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read parameter file {text!r}: {exc}")
    unknown = sorted(set(d) - set(PARAM_NAMES))
    if unknown:
        raise InputError("unknown parameter names", unknown)
    return PEBAX35.with_values(list(d), list(d.values()))


def cmd_estimate(args):
    spec, loads = _spec(args), _loads(args)
    out = _out_dir(args)
    try:
        obs = io.read_observations_csv(args.observations)
    except io.InputFormatError as exc:
        raise InputError(str(exc))
    init = _param_set(args.init)
    free = tuple(x.strip() for x in args.free.split(","))
    bad = [f for f in free if f not in PARAM_NAMES]
    if bad:
        raise InputError("unknown free parameters", bad)
    bounds = {}
    if args.bounds:
        try:
            bounds = {k: tuple(v) for k, v in json.loads(Path(args.bounds).read_text()).items()}
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise InputError(f"cannot read bounds {args.bounds!r}: {exc}")
    for n in free:
        lo, hi = bounds.get(n, (-np.inf, np.inf))
        if not lo <= getattr(init, n) <= hi:
            raise InputError(f"initial {n} outside its bounds")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            fit = estimate_parameters(spec, obs, init, bounds, free=free, loads=loads,
                                      max_iter=args.max_iter, steps_per_mm=args.steps_per_mm)
        except AllRecordsFailed as exc:
            _error(out, "AllRecordsFailed", str(exc))
            return EXIT_NONCONV
        except ValueError as exc:
            raise InputError(str(exc))
    io.write_json(out / "fit.json", fit.to_dict())
    print(json.dumps({"rmse_mm": fit.rmse, "converged": fit.converged,
                      **{n: getattr(fit.params, n) for n in free}}))
    if not fit.converged:
        _error(out, "NonConvergence", fit.message)
        return EXIT_NONCONV
    return EXIT_OK


def cmd_bench(args):
    spec, loads = _spec(args), _loads(args)
    seed = _seed(args)
    if args.samples < 10:
        raise InputError("--samples must be at least 10")
    out = _out_dir(args)
    jac = bench_jacobians(spec, loads, args.samples, seed, steps_per_mm=args.steps_per_mm)
    control = {}
    cfg = IKConfig(damping=args.lam, steps_per_mm=args.steps_per_mm)
    for shape in SHAPES:
        args.shape = shape
        ms = _track_once(spec, loads, args, cfg).step_ms()
        control[shape] = {"mean_ms": float(ms.mean()), "p95_ms": float(np.percentile(ms, 95)),
                          "steps": int(ms.size)}
    report = {"seed": seed, "samples": args.samples,
              "analytical_ms": jac["analytical_ms"], "fd_ms": jac["fd_ms"],
              "speedup_median": jac["fd_ms"]["median"] / jac["analytical_ms"]["median"],
              "max_rel_deviation": jac["max_rel_deviation"],
              "control_step_ms": control,
              "paper_reported": dict(PAPER_REPORTED_MS),
              "inputs": jac["inputs"]}
    io.write_json(out / "bench.json", report)
    print(json.dumps({k: report[k] for k in ("speedup_median", "max_rel_deviation")}))
    return EXIT_OK


def _error(out, kind, message, violations=(), **extra):
    payload = {"error": kind, "message": message, "violations": list(violations), **extra}
    if out is not None:
        io.write_json(Path(out) / "error.json", payload)
    print(json.dumps(payload), file=sys.stderr)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", default="pebax35", help="bundled name or YAML path")
    common.add_argument("--out", default=None, help=f"output directory (env {OUT_ENV})")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--steps-per-mm", type=float, default=DEFAULT_STEPS_PER_MM)
    common.add_argument("--field", default="0,0,3", help="scanner field [T] as bx,by,bz")
    common.add_argument("--gravity", default="0,0,0", help="gravity [mm/s^2]")
    common.add_argument("--tip-force", default="0,0,0", help="tip force [N]")
    common.add_argument("--fd", action="store_true", help="force finite-difference Jacobians")

    p = argparse.ArgumentParser(prog="mricath", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve the shooting problem once")
    s.add_argument("--currents", default=None, help="comma list, 3 per actuator [A]")
    s.add_argument("--insert", type=float, default=None, help="inserted length [mm]")
    s.add_argument("--tol", type=float, default=1e-8, help="boundary residual tolerance")
    s.add_argument("--trace", action="store_true", help="write a station trace CSV")
    s.set_defaults(func=cmd_solve)

    def track_opts(q):
        q.add_argument("--shape", choices=SHAPES, default="circle")
        q.add_argument("--points", type=int, default=64)
        q.add_argument("--size", type=float, default=10.0, help="shape radius [mm]")
        q.add_argument("--standoff", type=float, default=5.0)
        q.add_argument("--lambda", dest="lam", type=float, default=0.1)
        q.add_argument("--max-inner", type=int, default=20)

    t = sub.add_parser("track", parents=[common], help="open-loop trajectory tracking")
    track_opts(t)
    t.add_argument("--tol", type=float, default=1e-3, help="waypoint tolerance [mm]")
    t.add_argument("--repeats", type=int, default=1)
    t.set_defaults(func=cmd_track)

    m = sub.add_parser("metrics", parents=[common], help="accuracy and repeatability tables")
    m.add_argument("traces", nargs="*")
    m.add_argument("--reference", default=None, help="CSV with p_des columns")
    m.add_argument("--mode", choices=("raw", "aligned", "method2"), default="aligned")
    m.set_defaults(func=cmd_metrics)

    e = sub.add_parser("estimate", parents=[common], help="fit model parameters")
    e.add_argument("observations")
    e.add_argument("--init", default="pebax35", help="pebax35, qosina, or JSON file")
    e.add_argument("--bounds", default=None, help="JSON {name: [lo, hi]}")
    e.add_argument("--free", default="E,G,theta_x,theta_y")
    e.add_argument("--max-iter", type=int, default=200)
    e.set_defaults(func=cmd_estimate)

    b = sub.add_parser("bench", parents=[common], help="Jacobian and control-step timing")
    track_opts(b)
    b.add_argument("--samples", type=int, default=100)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = None
    try:
        out = _out_dir(args)
        return args.func(args)
    except InputError as exc:
        _error(out, "InputError", str(exc), exc.violations)
        return EXIT_INPUT
    except (BvpNotConverged, NonFiniteStateError) as exc:
        _error(out, type(exc).__name__, str(exc))
        return EXIT_NONCONV


if __name__ == "__main__":
    sys.exit(main())
