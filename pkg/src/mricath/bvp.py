"""Shooting-method BVP solver: find the base curvature that zeroes the tip moment."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ivp import DEFAULT_STEPS_PER_MM, NonFiniteStateError, _pieces, integrate_ivp
from .model import ActuationInput, CatheterSpec, ExternalLoads, ParameterLayout, RodState

RADIUS_INIT = 1.0
RADIUS_MIN = 1e-10
RADIUS_MAX = 1e3
SHRINK_BELOW = 0.25
GROW_ABOVE = 0.75
SINGULAR_COND = 1e12
STALL_LIMIT = 5
STALL_DAMPING = 1e-3


@dataclass(frozen=True)
class BvpSolution:
    tip: RodState
    u0_plus: np.ndarray
    residual: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    residual_jacobian: Optional[np.ndarray] = None   # d tau_res / d u0 at u0_plus
    evaluations: int = 0


class BvpNotConverged(RuntimeError):
    def __init__(self, solution: BvpSolution):
        self.solution = solution
        super().__init__(f"BVP not converged after {solution.iterations} iterations "
                         f"(residual {solution.residual_norm:.3e} N*mm)")


def boundary_residual(spec, loads, z, u0, steps_per_mm=DEFAULT_STEPS_PER_MM):
    """tau_res = K (u - u*) - l_tip at the distal end, for base curvature u0."""
    return integrate_ivp(spec, loads, z, u0, steps_per_mm=steps_per_mm).residual


def dogleg_step(residual, jac, trust_radius):
    """Powell dogleg step for the linear model r + J s, with ||s|| <= radius."""
    r = np.asarray(residual, dtype=float)
    J = np.asarray(jac, dtype=float)
    g = J.T @ r
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        return np.zeros_like(r)
    Jg = J @ g
    t = gnorm**2 / max(Jg @ Jg, np.finfo(float).tiny)
    cauchy = -t * g
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > SINGULAR_COND:
        if np.linalg.norm(cauchy) > trust_radius:
            return -trust_radius * g / gnorm
        return cauchy
    gn = -np.linalg.solve(J, r)
    if np.linalg.norm(gn) <= trust_radius:
        return gn
    cnorm = np.linalg.norm(cauchy)
    if cnorm >= trust_radius:
        return -trust_radius * g / gnorm
    # solve ||cauchy + tau d|| = radius for tau in [0, 1]
    d = gn - cauchy
    a = d @ d
    b = 2.0 * cauchy @ d
    c = cnorm**2 - trust_radius**2
    tau = (-b + np.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    return cauchy + tau * d


def update_trust_radius(radius, ratio, step_norm):
    """Textbook radius update; returns the new radius clamped to [1e-10, 1e3]."""
    if ratio < SHRINK_BELOW:
        radius = 0.25 * radius
    elif ratio > GROW_ABOVE and step_norm >= 0.99 * radius:
        radius = 2.0 * radius
    return float(np.clip(radius, RADIUS_MIN, RADIUS_MAX))


class _Evaluator:
    """Residual and d(residual)/d(u0) at a given base curvature."""

    def __init__(self, spec, loads, z, steps_per_mm, jacobian):
        self.spec, self.loads, self.z = spec, loads, z
        self.steps = steps_per_mm
        self.jacobian = jacobian
        self.layout = ParameterLayout(n_actuators=spec.n_actuators, currents=False,
                                      insertion=False, u0=True)
        self.pieces = _pieces(spec, loads, z, steps_per_mm)
        self.count = 0

    def __call__(self, u0):
        self.count += 1
        if self.jacobian == "fd":
            res = integrate_ivp(self.spec, self.loads, self.z, u0, steps_per_mm=self.steps,
                                _pieces_cache=self.pieces)
            return res, res.residual, self.fd_jacobian(u0)
        res = integrate_ivp(self.spec, self.loads, self.z, u0, with_derivatives=True,
                            layout=self.layout, steps_per_mm=self.steps, _pieces_cache=self.pieces)
        return res, res.residual, res.residual_derivative

    def fd_jacobian(self, u0, h=1e-7):
        J = np.zeros((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            rp = integrate_ivp(self.spec, self.loads, self.z, u0 + e, steps_per_mm=self.steps,
                               _pieces_cache=self.pieces).residual
            rm = integrate_ivp(self.spec, self.loads, self.z, u0 - e, steps_per_mm=self.steps,
                               _pieces_cache=self.pieces).residual
            J[:, k] = (rp - rm) / (2 * h)
        return J


def solve_bvp(spec: CatheterSpec, loads: ExternalLoads, z: ActuationInput, u0_guess=None,
              tol=1e-8, max_iter=50, steps_per_mm=DEFAULT_STEPS_PER_MM, jacobian="analytical",
              raise_on_failure=True) -> BvpSolution:
    """Trust-region dogleg shooting on the 3-vector tip-moment residual.

    ``jacobian='fd'`` swaps the analytical residual Jacobian for central
    differences (benchmark comparison only).
    """
    ev = _Evaluator(spec, loads, z, steps_per_mm, jacobian)
    u = np.zeros(3) if u0_guess is None else np.array(u0_guess, dtype=float)
    res, r, J = ev(u)
    f = r @ r
    radius = RADIUS_INIT
    it = 0
    stalls = 0
    while np.sqrt(f) >= tol and it < max_iter:
        it += 1
        if stalls >= STALL_LIMIT:
            step = -np.linalg.solve(J.T @ J + STALL_DAMPING**2 * np.eye(3), J.T @ r)
            stalls = 0
        else:
            step = dogleg_step(r, J, radius)
        snorm = np.linalg.norm(step)
        if snorm == 0.0 or snorm < 1e-15 * max(1.0, np.linalg.norm(u)):
            break
        try:
            res_n, r_n, J_n = ev(u + step)
        except NonFiniteStateError:
            radius = update_trust_radius(radius, -1.0, snorm)
            stalls += 1
            continue
        f_n = r_n @ r_n
        lin = r + J @ step
        predicted = f - lin @ lin
        actual = f - f_n
        ratio = actual / predicted if predicted > 0 else (1.0 if actual > 0 else -1.0)
        radius = update_trust_radius(radius, ratio, snorm)
        if f_n < f and np.isfinite(f_n):
            u, res, r, J, f = u + step, res_n, r_n, J_n, f_n
            stalls = 0
        else:
            stalls += 1
    norm = float(np.sqrt(f))
    sol = BvpSolution(res.tip, u, r, norm, it, norm < tol, J, ev.count)
    if not sol.converged and raise_on_failure:
        raise BvpNotConverged(sol)
    return sol
