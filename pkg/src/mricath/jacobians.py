"""Forward-kinematic (BVP) Jacobians: analytical assembly and finite-difference oracle."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bvp import BvpSolution, solve_bvp
from .ivp import DEFAULT_STEPS_PER_MM, integrate_ivp
from .lie import logm_so3
from .model import ActuationInput, CatheterSpec, ExternalLoads, ParameterLayout

SINGULAR_COND = 1e12
FD_STEP = 1e-4
AGREEMENT_RTOL = 1e-3
AGREEMENT_ATOL = 1e-8
PAPER_REPORTED_MS = {"analytical_jacobian": 2.0, "fd_jacobian": 5.5,
                     "control_step": 4.1, "fdm_control_step": 95.0}


class SingularBoundaryJacobian(RuntimeError):
    """d tau_res / d u0 is numerically singular (near-buckling configuration)."""


@dataclass(frozen=True)
class BvpJacobian:
    """Tip sensitivities to the actuation vector [currents..., inserted length]."""
    J_p: np.ndarray
    J_w: np.ndarray
    J_u: np.ndarray
    du0_dz: np.ndarray
    column_methods: tuple = field(default=())

    @property
    def n_inputs(self):
        return self.J_p.shape[1]


def assemble_bvp_jacobian(spec: CatheterSpec, loads: ExternalLoads, z: ActuationInput,
                          bvp_sol: BvpSolution, steps_per_mm=DEFAULT_STEPS_PER_MM) -> BvpJacobian:
    """J_BVP = dX/dz + dX/du0 du0/dz with du0/dz from implicit differentiation
    of the converged tip-moment condition."""
    layout = ParameterLayout.for_control(spec)
    res = integrate_ivp(spec, loads, z, bvp_sol.u0_plus, with_derivatives=True,
                        layout=layout, steps_per_mm=steps_per_mm)
    b = layout.blocks()
    zc = np.r_[b["currents"], b["insertion"]]
    uc = b["u0"]
    d = res.derivatives
    dres = res.residual_derivative
    A = dres[:, uc]
    if np.linalg.cond(A) > SINGULAR_COND:
        raise SingularBoundaryJacobian(f"cond(dtau/du0) = {np.linalg.cond(A):.3e}")
    du0_dz = -np.linalg.solve(A, dres[:, zc])
    J_p = d.dp[:, zc] + d.dp[:, uc] @ du0_dz
    J_w = d.w[:, zc] + d.w[:, uc] @ du0_dz
    J_u = d.du[:, zc] + d.du[:, uc] @ du0_dz
    methods = ("analytical",) * len(zc)
    return BvpJacobian(J_p, J_w, J_u, du0_dz, methods)


def fd_bvp_jacobian(spec: CatheterSpec, loads: ExternalLoads, z: ActuationInput,
                    bvp_sol: BvpSolution, h=FD_STEP, tol=1e-12,
                    steps_per_mm=DEFAULT_STEPS_PER_MM) -> BvpJacobian:
    """Central differences of re-solved BVPs over every actuation input.

    The inserted-length column falls back to a second-order backward
    difference when z^l + h would exceed the catheter length.
    """
    zv = z.as_vector()
    n = zv.size
    R0 = bvp_sol.tip.R

    def solve_at(vec):
        s = solve_bvp(spec, loads, ActuationInput.from_vector(vec), bvp_sol.u0_plus, tol=tol,
                      steps_per_mm=steps_per_mm, raise_on_failure=False)
        return np.concatenate([s.tip.p, logm_so3(s.tip.R @ R0.T), s.tip.u, s.u0_plus])

    centre = np.concatenate([bvp_sol.tip.p, np.zeros(3), bvp_sol.tip.u, bvp_sol.u0_plus])
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        if k == n - 1 and zv[k] + h > spec.total_length:
            fm1 = solve_at(zv - e)
            fm2 = solve_at(zv - 2 * e)
            cols.append((3 * centre - 4 * fm1 + fm2) / (2 * h))
        else:
            cols.append((solve_at(zv + e) - solve_at(zv - e)) / (2 * h))
    D = np.array(cols).T
    return BvpJacobian(D[0:3], D[3:6], D[6:9], D[9:12], ("fd",) * n)


def relative_deviation(a, ref, rtol=AGREEMENT_RTOL, atol=AGREEMENT_ATOL):
    """max |a - ref| / max(|ref|, atol/rtol): <= rtol iff every element agrees
    to rtol relative with an absolute floor of atol."""
    a, ref = np.asarray(a), np.asarray(ref)
    return float(np.max(np.abs(a - ref) / np.maximum(np.abs(ref), atol / rtol)))


def sample_inputs(spec: CatheterSpec, count, seed=0, current_bound=0.3, insertion_range=10.0):
    """Seeded random actuation inputs: currents uniform in +-bound, insertion
    uniform in [L - range, L]."""
    rng = np.random.default_rng(seed)
    L = spec.total_length
    lo = max(L - insertion_range, spec.min_inserted_length() + 1e-6)
    out = []
    for _ in range(count):
        c = rng.uniform(-current_bound, current_bound, size=(spec.n_actuators, 3))
        out.append(ActuationInput(c, rng.uniform(lo, L)))
    return out


def _stats(ms):
    ms = np.asarray(ms)
    return {"mean": float(ms.mean()), "median": float(np.median(ms)),
            "p95": float(np.percentile(ms, 95))}


def bench_jacobians(spec: CatheterSpec, loads: ExternalLoads, sample_count=100, seed=0,
                    current_bound=0.3, steps_per_mm=DEFAULT_STEPS_PER_MM):
    """Time analytical vs finite-difference BVP Jacobians on random inputs."""
    if sample_count < 10:
        raise ValueError("sample_count must be >= 10")
    inputs = sample_inputs(spec, sample_count, seed, current_bound)
    t_an, t_fd, dev = [], [], []
    # warm the compiled kernel before timing
    warm = solve_bvp(spec, loads, inputs[0], steps_per_mm=steps_per_mm)
    assemble_bvp_jacobian(spec, loads, inputs[0], warm, steps_per_mm)
    for z in inputs:
        sol = solve_bvp(spec, loads, z, steps_per_mm=steps_per_mm)
        t0 = time.perf_counter()
        Ja = assemble_bvp_jacobian(spec, loads, z, sol, steps_per_mm)
        t1 = time.perf_counter()
        Jf = fd_bvp_jacobian(spec, loads, z, sol, steps_per_mm=steps_per_mm)
        t2 = time.perf_counter()
        t_an.append(1e3 * (t1 - t0))
        t_fd.append(1e3 * (t2 - t1))
        dev.append(relative_deviation(Ja.J_p, Jf.J_p))
    return {"samples": sample_count, "seed": seed,
            "analytical_ms": _stats(t_an), "fd_ms": _stats(t_fd),
            "max_rel_deviation": float(max(dev)),
            "inputs": [z.as_vector().tolist() for z in inputs]}
