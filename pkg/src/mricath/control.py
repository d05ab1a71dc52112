"""Iterative-Jacobian open-loop control with damped least squares."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .bvp import solve_bvp
from .ivp import DEFAULT_STEPS_PER_MM, integrate_ivp
from .jacobians import assemble_bvp_jacobian, fd_bvp_jacobian
from .model import ActuationInput, CatheterSpec, ExternalLoads


class UnreachableWaypoint(RuntimeError):
    def __init__(self, index, error, result):
        self.index = index
        self.error = error
        self.result = result
        super().__init__(f"waypoint {index} missed by {error:.3e} mm")


@dataclass(frozen=True)
class IKConfig:
    damping: float = 0.1            # lambda
    tol: float = 1e-3               # mm
    max_inner: int = 20
    max_current_step: float = 0.05  # A per inner step
    max_insertion_step: float = 1.0  # mm per inner step
    current_limit: Optional[float] = None   # defaults to spec.max_current
    jacobian: str = "analytical"    # or "fd"
    bvp_tol: float = 1e-8
    steps_per_mm: float = DEFAULT_STEPS_PER_MM


@dataclass(frozen=True)
class ControlStepRecord:
    waypoint: int
    z_before: np.ndarray
    z_after: np.ndarray
    p_tip: np.ndarray       # predicted tip at z_after
    dp_norm: float          # remaining error at z_after
    bvp_iterations: int
    wall_ms: float


@dataclass
class WaypointResult:
    index: int
    p_des: np.ndarray
    p_model: np.ndarray
    z: np.ndarray
    u0: np.ndarray
    inner_iters: int
    error: float
    converged: bool
    wall_ms: float


@dataclass
class TrackResult:
    waypoints: List[WaypointResult] = field(default_factory=list)
    steps: List[ControlStepRecord] = field(default_factory=list)

    @property
    def desired(self):
        return np.array([w.p_des for w in self.waypoints])

    @property
    def model_trace(self):
        return np.array([w.p_model for w in self.waypoints])

    @property
    def inputs(self):
        return np.array([w.z for w in self.waypoints])

    def step_ms(self):
        return np.array([s.wall_ms for s in self.steps])


def dls_step(J_p, dp, damping):
    """dz = J^T (J J^T + lambda^2 I)^-1 dp."""
    J = np.asarray(J_p, dtype=float)
    A = J @ J.T + damping**2 * np.eye(J.shape[0])
    try:
        y = np.linalg.solve(A, np.asarray(dp, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise ValueError("J J^T is singular; use a positive damping") from exc
    return J.T @ y


def _limit_step(dz, cfg: IKConfig):
    """Scale dz uniformly so no component exceeds its per-step bound."""
    bound = np.full(dz.size, cfg.max_current_step)
    bound[-1] = cfg.max_insertion_step
    scale = np.max(np.abs(dz) / bound)
    return dz / scale if scale > 1.0 else dz


def _clip_inputs(zv, spec, cfg):
    lim = spec.max_current if cfg.current_limit is None else cfg.current_limit
    zv = zv.copy()
    zv[:-1] = np.clip(zv[:-1], -lim, lim)
    lo = spec.min_inserted_length() + 1e-3
    zv[-1] = np.clip(zv[-1], lo, spec.total_length)
    return zv


def track_trajectory(spec: CatheterSpec, loads: ExternalLoads, waypoints, cfg: IKConfig = IKConfig(),
                     z_init: Optional[ActuationInput] = None, raise_unreachable=True) -> TrackResult:
    """Drive the model tip through ``waypoints`` using model predictions only."""
    z = z_init or ActuationInput.zeros(spec)
    zv = z.as_vector()
    sol = solve_bvp(spec, loads, z, tol=cfg.bvp_tol, steps_per_mm=cfg.steps_per_mm)
    out = TrackResult()
    for wi, wp in enumerate(waypoints):
        t_wp = time.perf_counter()
        p_des = np.asarray(wp.p_des, dtype=float)
        dp = p_des - sol.tip.p
        err = float(np.linalg.norm(dp))
        iters = 0
        while err >= cfg.tol and iters < cfg.max_inner:
            t0 = time.perf_counter()
            zin = ActuationInput.from_vector(zv)
            if cfg.jacobian == "fd":
                J = fd_bvp_jacobian(spec, loads, zin, sol, steps_per_mm=cfg.steps_per_mm)
            else:
                J = assemble_bvp_jacobian(spec, loads, zin, sol, cfg.steps_per_mm)
            dz = _limit_step(dls_step(J.J_p, dp, cfg.damping), cfg)
            z_new = _clip_inputs(zv + dz, spec, cfg)
            sol = solve_bvp(spec, loads, ActuationInput.from_vector(z_new), sol.u0_plus,
                            tol=cfg.bvp_tol, steps_per_mm=cfg.steps_per_mm)
            dp = p_des - sol.tip.p
            err = float(np.linalg.norm(dp))
            iters += 1
            out.steps.append(ControlStepRecord(wi, zv, z_new, sol.tip.p, err, sol.iterations,
                                               1e3 * (time.perf_counter() - t0)))
            zv = z_new
        res = WaypointResult(wi, p_des, np.array(sol.tip.p), zv.copy(), sol.u0_plus.copy(),
                             iters, err, err < cfg.tol, 1e3 * (time.perf_counter() - t_wp))
        out.waypoints.append(res)
        if err > 10 * cfg.tol and raise_unreachable:
            raise UnreachableWaypoint(wi, err, out)
    return out


def replay(spec: CatheterSpec, loads: ExternalLoads, result: TrackResult, steps_per_mm=DEFAULT_STEPS_PER_MM):
    """Re-run the forward model at the recorded (z, u0+) of every waypoint."""
    tips = []
    for w in result.waypoints:
        r = integrate_ivp(spec, loads, ActuationInput.from_vector(w.z), w.u0, steps_per_mm=steps_per_mm)
        tips.append(r.tip.p)
    return np.array(tips)
