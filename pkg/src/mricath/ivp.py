"""Initial value problem: integrate the rod from base to tip.

The public single-step functions (``flexible_rhs``, ``deriv_rhs_*``,
``rigid_transfer*``) are plain numpy transcriptions of the model equations.
``integrate_ivp`` runs the compiled kernel in ``_kernel``, which implements
the same arithmetic; the test-suite checks the two against each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernel
from .lie import hat
from .magnetics import actuator_moment, moment_current_jacobian, moment_rotation_derivative
from .model import (ActuationInput, CatheterSpec, ExternalLoads, FlexibleSegmentSpec,
                    ParameterLayout, RigidSegmentSpec, RodState, SpecError)

E3 = np.array([0.0, 0.0, 1.0])
DEFAULT_STEPS_PER_MM = 4.0
# gravity is given in mm/s^2; kg * mm/s^2 -> N
_MM_TO_M = 1e-3


class NonFiniteStateError(RuntimeError):
    def __init__(self, s):
        self.s = float(s)
        super().__init__(f"state became non-finite at arclength {s:.6g} mm")


@dataclass(frozen=True)
class AugmentedState:
    """Rod state with its derivatives with respect to the parameter vector."""
    state: RodState
    dp: np.ndarray
    du: np.ndarray
    w: np.ndarray
    layout: Optional[ParameterLayout] = None

    def skew(self, j):
        """hat(w_j), exactly skew-symmetric by construction."""
        return hat(self.w[:, j])

    def dR(self, j):
        """dR/dphi_j = hat(w_j) R."""
        return hat(self.w[:, j]) @ self.state.R


@dataclass(frozen=True)
class IvpResult:
    tip: RodState
    derivatives: Optional[AugmentedState]
    tip_moment: np.ndarray          # l_tip
    tip_moment_derivative: Optional[np.ndarray]
    end_stiffness: np.ndarray       # diag K of the last flexible segment
    end_rest_curvature: np.ndarray
    station_trace: Optional[np.ndarray] = None

    @property
    def residual(self):
        """Boundary moment residual K (u - u*) - l_tip at the distal end."""
        return self.end_stiffness * (self.tip.u - self.end_rest_curvature) - self.tip_moment

    @property
    def residual_derivative(self):
        d = self.derivatives
        return self.end_stiffness[:, None] * d.du - self.tip_moment_derivative

    def stations(self):
        """Station trace as a list of RodState."""
        if self.station_trace is None:
            return []
        return [RodState(r[1:4], r[7:16].reshape(3, 3), r[4:7], r[0]) for r in self.station_trace]


# ---------------------------------------------------------------- reference ops

def flexible_rhs(state: RodState, seg: FlexibleSegmentSpec, loads: ExternalLoads, f_cum):
    """(p', R', u') on a flexible segment with piecewise-constant K and u*."""
    R, u = state.R, state.u
    k = seg.stiffness
    m = k * (u - seg.rest_curvature)
    rhs = np.cross(u, m) + np.cross(E3, R.T @ f_cum) + R.T @ loads.distributed_moment
    return R @ E3, R @ hat(u), -rhs / k


def _masses(spec: CatheterSpec, loads: ExternalLoads):
    g = loads.gravity * spec.mass_scale * _MM_TO_M
    return g


def f_cumulative(spec: CatheterSpec, loads: ExternalLoads, z: ActuationInput, s):
    """Spatial force carried at inserted arclength s: distal gravity plus f_tip."""
    g = _masses(spec, loads)
    sigma = spec.total_length - z.inserted_length + s
    f = loads.f_tip.copy()
    for seg, (a, b) in zip(spec.segments, spec.bounds()):
        if isinstance(seg, FlexibleSegmentSpec):
            f += seg.mass_per_length * g * max(0.0, b - max(a, sigma))
        elif seg.actuator is not None and 0.5 * (a + b) > sigma:
            f += seg.actuator.coil_mass * g
    return f


def rigid_transfer(state: RodState, seg: RigidSegmentSpec, tau, K_prev, K_next,
                   ustar_prev=np.zeros(3), ustar_next=np.zeros(3)):
    """Carry the state across a rigid segment; K arguments are 3x3 or diagonals."""
    kp = np.diag(K_prev) if np.ndim(K_prev) == 2 else np.asarray(K_prev)
    kn = np.diag(K_next) if np.ndim(K_next) == 2 else np.asarray(K_next)
    p = state.p + seg.length * state.R @ E3
    u = ustar_next + (kp * (state.u - ustar_prev) - tau) / kn
    return RodState(p, state.R, u, state.s + seg.length)


def deriv_rhs_position(R, w):
    """Column j: third column of hat(w_j) R."""
    return np.cross(w.T, R[:, 2]).T


def deriv_rhs_w(R, du):
    """Column j: R du_j."""
    return R @ du


def deriv_rhs_curvature(state: RodState, du, w, seg: FlexibleSegmentSpec, loads: ExternalLoads,
                        f_cum, f_tip_cols=None):
    """d/ds (du/dphi) on a flexible segment."""
    R, u = state.R, state.u
    K = np.diag(seg.stiffness)
    Kinv = np.diag(1.0 / seg.stiffness)
    dFdu = Kinv @ (hat(K @ u) - hat(K @ seg.rest_curvature) - hat(u) @ K)
    out = dFdu @ du
    l = loads.distributed_moment
    for j in range(du.shape[1]):
        wR = hat(w[:, j]) @ R
        out[:, j] -= Kinv @ (hat(E3) @ wR.T @ f_cum + wR.T @ l)
    if f_tip_cols is not None:
        out[:, f_tip_cols] += -Kinv @ hat(E3) @ R.T
    return out


def rigid_transfer_derivatives(aug: AugmentedState, seg: RigidSegmentSpec, currents, field,
                               K_prev, K_next, current_cols=None):
    """Carry (dp, du, w) across a rigid segment, including d tau / d phi."""
    R = aug.state.R
    kp = np.diag(K_prev) if np.ndim(K_prev) == 2 else np.asarray(K_prev)
    kn = np.diag(K_next) if np.ndim(K_next) == 2 else np.asarray(K_next)
    n = aug.dp.shape[1]
    dp = aug.dp + seg.length * deriv_rhs_position(R, aug.w)
    dtau = np.zeros((3, n))
    act = seg.actuator
    if act is not None:
        for j in range(n):
            dtau[:, j] = moment_rotation_derivative(act, R, currents, field, aug.w[:, j])
        if current_cols is not None:
            dtau[:, current_cols] += moment_current_jacobian(act, R, field)
    du = (kp[:, None] * aug.du - dtau) / kn[:, None]
    return AugmentedState(aug.state, dp, du, aug.w.copy(), aug.layout)


# ---------------------------------------------------------------- integration

def _pieces(spec: CatheterSpec, loads: ExternalLoads, z: ActuationInput, steps_per_mm):
    errs = z.check(spec, max_current=np.inf)
    if errs:
        raise SpecError(errs)
    sigma0 = spec.total_length - z.inserted_length
    g = _masses(spec, loads)
    kind, plen, nst, kd, us, fd, act = [], [], [], [], [], [], []
    point = []
    a_idx = 0
    for seg, (a, b) in zip(spec.segments, spec.bounds()):
        if isinstance(seg, RigidSegmentSpec) and seg.actuator is not None:
            this_act = a_idx
            a_idx += 1
        else:
            this_act = -1
        if b <= sigma0:
            continue
        length = b - max(a, sigma0)
        if isinstance(seg, FlexibleSegmentSpec):
            kind.append(_kernel.FLEX)
            # step count from the full segment keeps h smooth in the insertion
            nst.append(max(1, math.ceil(seg.length * steps_per_mm - 1e-9)))
            kd.append(seg.stiffness)
            us.append(seg.rest_curvature)
            fd.append(seg.mass_per_length * g)
            point.append(fd[-1] * length)
        else:
            kind.append(_kernel.RIGID)
            nst.append(0)
            kd.append(np.ones(3))
            us.append(np.zeros(3))
            fd.append(np.zeros(3))
            point.append(seg.actuator.coil_mass * g if seg.actuator is not None else np.zeros(3))
        plen.append(length)
        act.append(this_act)
    point = np.array(point)
    after = np.zeros_like(point)
    for i in range(len(point) - 2, -1, -1):
        after[i] = after[i + 1] + point[i + 1]
    acts = spec.actuators
    D = np.array([a.dipole_map for a in acts]) if acts else np.zeros((1, 3, 3))
    return dict(kind=np.array(kind, dtype=np.int64), plen=np.array(plen), nsteps=np.array(nst, dtype=np.int64),
                kd=np.array(kd), us=np.array(us), fdist=np.array(fd), fafter=after,
                act=np.array(act, dtype=np.int64), D=D)


def _initial_derivatives(spec, loads, z, u0, layout: ParameterLayout, R0, pieces):
    n = layout.size
    dp = np.zeros((3, n))
    du = np.zeros((3, n))
    w = np.zeros((3, n))
    blocks = layout.blocks()
    ccol = -np.ones((max(spec.n_actuators, 1), 3), dtype=np.int64)
    if layout.currents:
        ccol[:spec.n_actuators] = np.arange(blocks["currents"].start,
                                            blocks["currents"].stop).reshape(-1, 3)
    fcol = -np.ones(3, dtype=np.int64)
    if layout.f_tip:
        fcol[:] = np.arange(blocks["f_tip"].start, blocks["f_tip"].stop)
    if layout.u0:
        du[:, blocks["u0"]] = np.eye(3)
    if layout.p0:
        dp[:, blocks["p0"]] = np.eye(3)
    if layout.r0:
        w[:, blocks["r0"]] = np.eye(3)
    if layout.insertion:
        # extending the insertion slides the base proximally along the rod:
        # tip derivative is the tangent map applied to the state rate at the base
        j = blocks["insertion"].start
        seg = _first_flexible(spec)
        base = RodState(np.zeros(3), R0, u0)
        f0 = f_cumulative(spec, loads, z, 0.0)
        dp[:, j] = R0 @ E3
        w[:, j] = R0 @ u0
        du[:, j] = flexible_rhs(base, seg, loads, f0)[2]
    return dp, du, w, ccol, fcol


def _first_flexible(spec):
    return spec.segments[0]


def integrate_ivp(spec: CatheterSpec, loads: ExternalLoads, z: ActuationInput, u0,
                  with_derivatives=False, layout: Optional[ParameterLayout] = None,
                  steps_per_mm=DEFAULT_STEPS_PER_MM, trace=False, p0=None, R0=None,
                  _pieces_cache=None) -> IvpResult:
    """Integrate the rod from the base (s=0) to the tip (s=z^l).

    With ``with_derivatives`` the parameter derivatives selected by ``layout``
    are co-integrated with the state.
    """
    u0 = np.asarray(u0, dtype=float)
    p0 = spec.base_position if p0 is None else np.asarray(p0, dtype=float)
    R0 = spec.base_rotation if R0 is None else np.asarray(R0, dtype=float)
    pc = _pieces_cache if _pieces_cache is not None else _pieces(spec, loads, z, steps_per_mm)
    if with_derivatives:
        layout = layout or ParameterLayout.for_control(spec)
        dp0, du0, w0, ccol, fcol = _initial_derivatives(spec, loads, z, u0, layout, R0, pc)
    else:
        dp0 = du0 = w0 = np.zeros((3, 0))
        ccol = -np.ones((max(spec.n_actuators, 1), 3), dtype=np.int64)
        fcol = -np.ones(3, dtype=np.int64)
    cur = z.currents if z.currents.size else np.zeros((1, 3))
    y, ltip, dltip, kd_end, us_end, status, s_fail, tr = _kernel.integrate(
        pc["kind"], pc["plen"], pc["nsteps"], pc["kd"], pc["us"], pc["fdist"], pc["fafter"],
        pc["act"], pc["D"], np.ascontiguousarray(cur, dtype=float), loads.b_field, loads.f_tip,
        loads.distributed_moment, loads.tip_moment, p0, np.ascontiguousarray(R0), u0,
        dp0, du0, w0, ccol, fcol, bool(trace))
    if status != _kernel.OK:
        raise NonFiniteStateError(s_fail)
    tip = RodState(y[0:3], y[3:12].reshape(3, 3), y[12:15], z.inserted_length)
    deriv = None
    dl = None
    if with_derivatives:
        n = dp0.shape[1]
        dp = y[15:15 + 3 * n].reshape(n, 3).T
        du = y[15 + 3 * n:15 + 6 * n].reshape(n, 3).T
        w = y[15 + 6 * n:15 + 9 * n].reshape(n, 3).T
        deriv = AugmentedState(tip, dp, du, w, layout)
        dl = dltip
    return IvpResult(tip, deriv, ltip, dl, kd_end, us_end, tr if trace else None)


def write_trace_csv(result: IvpResult, path):
    """Station trace: s, p_xyz, u_xyz, R row-major."""
    header = "s,p_x,p_y,p_z,u_x,u_y,u_z," + ",".join(f"R_{i}{j}" for i in range(3) for j in range(3))
    np.savetxt(path, result.station_trace, delimiter=",", header=header, comments="", fmt="%.12g")
