"""Fit catheter material and actuator parameters to observed tip positions.

The fit is a box-constrained Levenberg-Marquardt iteration over normalised
coordinates: linear parameters are divided by the magnitude of their initial
value, coil mass and density are fitted as logarithms. The fit Jacobian is
taken by central differences.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .bvp import BvpNotConverged, solve_bvp
from .ivp import DEFAULT_STEPS_PER_MM, NonFiniteStateError
from .model import ActuationInput, CatheterSpec, ExternalLoads

PARAM_NAMES = ("E", "G", "theta_x", "theta_y", "NA_x", "NA_y", "NA_z", "M", "rho")
LOG_PARAMS = ("M", "rho")


@dataclass(frozen=True)
class ParameterSet:
    E: float                 # MPa
    G: float                 # MPa
    theta_x: float           # rad
    theta_y: float
    NA_x: float
    NA_y: float
    NA_z: float
    M: float                 # coil mass, configured unit
    rho: float               # mass per length, configured unit / mm

    def as_dict(self):
        return asdict(self)

    def vector(self, names=PARAM_NAMES):
        return np.array([getattr(self, n) for n in names], dtype=float)

    def with_values(self, names, values):
        return replace(self, **{n: float(v) for n, v in zip(names, values)})


PEBAX35 = ParameterSet(E=31.03, G=8.11, theta_x=3.25, theta_y=0.06,
                       NA_x=-0.43, NA_y=0.57, NA_z=0.71, M=2.78e-9, rho=5.89e-11)
QOSINA = ParameterSet(E=14.54, G=2.82, theta_x=-0.20, theta_y=-0.16,
                      NA_x=-0.43, NA_y=0.54, NA_z=0.48, M=1.64e-7, rho=3.06e-9)


def instantiate(spec_template: CatheterSpec, params: ParameterSet) -> CatheterSpec:
    """Copy of the template with every flexible segment and actuator re-parameterised."""
    spec = spec_template.with_material(params.E, params.G)
    spec = spec.with_actuator(turn_area=[params.NA_x, params.NA_y, params.NA_z],
                              theta_x=params.theta_x, theta_y=params.theta_y, coil_mass=params.M)
    return spec.with_density(params.rho)


@dataclass(frozen=True)
class Observation:
    z: ActuationInput
    p_obs: np.ndarray
    record_id: int = 0


@dataclass
class ObservationSet:
    records: List[Observation]

    @property
    def count(self):
        return len(self.records)

    def positions(self):
        return np.array([r.p_obs for r in self.records])


@dataclass
class FitResult:
    params: ParameterSet
    rmse: float
    confidence: Dict[str, float]
    iterations: int
    converged: bool
    free: tuple
    failed_records: int = 0
    message: str = ""
    history: List[float] = field(default_factory=list)

    def to_dict(self):
        return {"params": self.params.as_dict(), "rmse_mm": self.rmse,
                "confidence": self.confidence, "iterations": self.iterations,
                "converged": self.converged, "free": list(self.free),
                "failed_records": self.failed_records, "message": self.message,
                "objective_history": self.history}


class AllRecordsFailed(RuntimeError):
    pass


def three_sweep_protocol(spec: CatheterSpec, levels=(-0.3, -0.2, -0.1, 0.1, 0.2, 0.3),
                         inserted_length=None):
    """Current sweeps on the axial coil, then each side coil, one at a time."""
    L = spec.total_length if inserted_length is None else inserted_length
    out = []
    for coil in (2, 0, 1):
        for level in levels:
            c = np.zeros((spec.n_actuators, 3))
            c[:, coil] = level
            out.append(ActuationInput(c, L))
    return out


def protocol_loads(strength=3.0, angle=np.pi / 4):
    """Scanner field tilted by ``angle`` from the catheter axis in the x-z plane,
    so the axial coil bends and a side coil twists the undeflected catheter."""
    return ExternalLoads(b_field=strength * np.array([np.sin(angle), 0.0, np.cos(angle)]))


class _Predictor:
    def __init__(self, spec_template, loads, observations, steps_per_mm, bvp_tol):
        self.template = spec_template
        self.loads = loads
        self.obs = observations
        self.steps = steps_per_mm
        self.tol = bvp_tol
        self.u0 = [None] * observations.count

    def __call__(self, params: ParameterSet, update_cache=False):
        spec = instantiate(self.template, params)
        preds = np.full((self.obs.count, 3), np.nan)
        for i, rec in enumerate(self.obs.records):
            try:
                sol = solve_bvp(spec, self.loads, rec.z, self.u0[i], tol=self.tol,
                                steps_per_mm=self.steps)
            except (BvpNotConverged, NonFiniteStateError):
                continue
            preds[i] = sol.tip.p
            if update_cache or self.u0[i] is None:
                self.u0[i] = sol.u0_plus
        return preds


def predict_tips(spec_template: CatheterSpec, params: ParameterSet, observations: ObservationSet,
                 loads: ExternalLoads = ExternalLoads(), steps_per_mm=DEFAULT_STEPS_PER_MM,
                 bvp_tol=1e-10):
    """Model tip position for every record; failed solves are NaN rows (with a warning)."""
    preds = _Predictor(spec_template, loads, observations, steps_per_mm, bvp_tol)(params)
    bad = int(np.isnan(preds[:, 0]).sum())
    if bad:
        warnings.warn(f"{bad} record(s) failed to solve and are excluded")
    return preds


def synthesize_observations(spec_template, params, inputs: Sequence[ActuationInput],
                            loads=ExternalLoads(), noise=0.0, rng=None, noise_per_axis=True):
    """Model-generated observations with optional isotropic Gaussian noise (mm per axis)."""
    obs = ObservationSet([Observation(z, np.zeros(3), i) for i, z in enumerate(inputs)])
    p = predict_tips(spec_template, params, obs, loads, bvp_tol=1e-12)
    if noise:
        rng = rng or np.random.default_rng(0)
        p = p + rng.normal(0.0, noise, size=p.shape)
    return ObservationSet([Observation(z, p[i], i) for i, z in enumerate(inputs)])


class _Coordinates:
    """Map between caller-unit parameter values and the normalised fit vector."""

    def __init__(self, init: ParameterSet, free, bounds, units):
        self.free = tuple(free)
        self.units = [units.get(n, 1.0) for n in self.free]
        self.base = init.with_values(self.free, [getattr(init, n) * u
                                                 for n, u in zip(self.free, self.units)])
        self.log = np.array([n in LOG_PARAMS for n in self.free])
        raw = np.array([getattr(init, n) for n in self.free], dtype=float)
        if np.any(raw[self.log] <= 0):
            raise ValueError("log-space parameters need a positive initial value")
        self.scale = np.where(np.abs(raw) > 0, np.abs(raw), 1.0)
        self.x0 = self.encode(raw)
        lo = np.array([bounds.get(n, (-np.inf, np.inf))[0] for n in self.free], dtype=float)
        hi = np.array([bounds.get(n, (-np.inf, np.inf))[1] for n in self.free], dtype=float)
        with np.errstate(divide="ignore"):
            lo[self.log] = np.log(np.maximum(lo[self.log], 0.0))
            hi[self.log] = np.log(hi[self.log])
        lo[~self.log] /= self.scale[~self.log]
        hi[~self.log] /= self.scale[~self.log]
        self.lo, self.hi = lo, hi

    def encode(self, raw):
        return np.where(self.log, np.log(np.where(self.log, raw, 1.0)), raw / self.scale)

    def decode(self, x) -> ParameterSet:
        raw = np.where(self.log, np.exp(np.where(self.log, x, 0.0)), x * self.scale)
        return self.base.with_values(self.free, raw * np.array(self.units))

    def project(self, x):
        return np.clip(x, self.lo, self.hi)


def estimate_parameters(spec_template: CatheterSpec, observations: ObservationSet,
                        init: ParameterSet, bounds: Optional[Dict[str, tuple]] = None,
                        free: Sequence[str] = PARAM_NAMES, loads: ExternalLoads = ExternalLoads(),
                        units: Optional[Dict[str, float]] = None, max_iter=200, grad_tol=1e-8,
                        step_tol=1e-10, rel_step=1e-4, steps_per_mm=DEFAULT_STEPS_PER_MM,
                        bvp_tol=1e-11) -> FitResult:
    """Levenberg-Marquardt fit of the ``free`` parameters to the observed tips.

    ``units`` maps a parameter name to the factor converting the values given
    in ``init``/``bounds`` into model units (e.g. ``{"E": 1e-6}`` for Pa).
    """
    bounds = dict(bounds or {})
    units = dict(units or {})
    if 3 * observations.count < len(free):
        raise ValueError("not enough observations for the free parameters")
    coords = _Coordinates(init, free, bounds, units)

    predictor = _Predictor(spec_template, loads, observations, steps_per_mm, bvp_tol)
    p_obs = observations.positions()

    decode = coords.decode

    def residuals(x, update_cache=False):
        pred = predictor(decode(x), update_cache)
        ok = ~np.isnan(pred[:, 0])
        r = np.where(ok[:, None], pred - p_obs, 0.0)
        return r.ravel(), int((~ok).sum())

    x = coords.project(coords.x0)
    r, failed = residuals(x, update_cache=True)
    if failed == observations.count:
        raise AllRecordsFailed("no record could be solved at the initial parameters")
    f = r @ r
    history = [float(f)]
    lam = 1e-3
    it = 0
    converged = False
    message = "max iterations"
    J = None
    while it < max_iter:
        it += 1
        J = np.empty((r.size, x.size))
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = rel_step
            xp, xm = coords.project(x + e), coords.project(x - e)
            rp, _ = residuals(xp)
            rm, _ = residuals(xm)
            J[:, k] = (rp - rm) / (xp[k] - xm[k])
        g = J.T @ r
        if np.max(np.abs(g)) < grad_tol:
            converged, message = True, "gradient tolerance"
            break
        JtJ = J.T @ J
        diag = np.maximum(np.diag(JtJ), 1e-12 * max(np.max(np.diag(JtJ)), 1e-300))
        accepted = False
        small_step = False
        while lam < 1e16:
            dx = -np.linalg.solve(JtJ + lam * np.diag(diag), g)
            x_new = coords.project(x + dx)
            if np.linalg.norm(x_new - x) < step_tol * (1.0 + np.linalg.norm(x)):
                small_step = True
                break
            r_new, failed_new = residuals(x_new)
            f_new = r_new @ r_new
            if failed_new < observations.count and f_new < f:
                x, r, f, failed = x_new, r_new, f_new, failed_new
                residuals(x, update_cache=True)
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                break
            lam *= 4.0
        history.append(float(f))
        if small_step:
            converged, message = True, "step tolerance"
            break
        if not accepted:
            message = "no decrease possible"
            break
    n_ok = observations.count - failed
    rmse = float(np.sqrt(f / (3 * max(n_ok, 1))))
    conf = {}
    if J is not None:
        cov = np.linalg.pinv(J.T @ J)
        conf = {n: float(cov[k, k]) for k, n in enumerate(free)}
    if failed:
        warnings.warn(f"{failed} record(s) failed to solve and are excluded")
    return FitResult(decode(x), rmse, conf, it, converged, tuple(free), failed, message, history)
