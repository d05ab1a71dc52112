"""Domain types for the catheter model.

Units throughout: mm, N, N*mm^2 (stiffness), rad, A, T. Masses are stored in
the configured mass unit and converted with ``CatheterSpec.mass_scale``
(kg per unit).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .lie import orthonormality_error, rot_x, rot_y, wrap_angle

ORTHO_TOL = 1e-9


def _frozen(a, shape=None):
    arr = np.array(a, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


def annulus_stiffness(E, G, r_in, r_out):
    """Diagonal stiffness [EI, EI, GJ] of a tube cross-section."""
    I = np.pi * (r_out**4 - r_in**4) / 4.0
    return np.array([E * I, E * I, G * 2.0 * I])


@dataclass(frozen=True)
class RodState:
    p: np.ndarray
    R: np.ndarray
    u: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(self.p, (3,)))
        object.__setattr__(self, "R", _frozen(self.R, (3, 3)))
        object.__setattr__(self, "u", _frozen(self.u, (3,)))
        object.__setattr__(self, "s", float(self.s))

    def check(self, inserted_length=None):
        """Return a list of broken invariants (empty when consistent)."""
        errs = []
        if orthonormality_error(self.R) >= ORTHO_TOL:
            errs.append("R: not orthonormal")
        if np.linalg.det(self.R) <= 0:
            errs.append("R: det <= 0")
        if self.s < 0 or (inserted_length is not None and self.s > inserted_length + 1e-9):
            errs.append("s: outside [0, inserted length]")
        return errs


@dataclass(frozen=True)
class ActuatorSpec:
    """Coil set: signed turn-area diagonal, alignment angles and mass."""
    turn_area: np.ndarray
    theta_x: float = 0.0
    theta_y: float = 0.0
    coil_mass: float = 0.0

    def __post_init__(self):
        NA = np.asarray(self.turn_area, dtype=float)
        if NA.shape == (3, 3):
            NA = np.diag(NA)
        object.__setattr__(self, "turn_area", _frozen(NA, (3,)))
        object.__setattr__(self, "theta_x", wrap_angle(self.theta_x))
        object.__setattr__(self, "theta_y", wrap_angle(self.theta_y))
        object.__setattr__(self, "coil_mass", float(self.coil_mass))

    @property
    def alignment(self):
        """Coil-frame rotation Rot_x(theta_x) @ Rot_y(theta_y)."""
        return rot_x(self.theta_x) @ rot_y(self.theta_y)

    @property
    def dipole_map(self):
        """3x3 map from coil currents to body-frame dipole, R_c @ diag(NA)."""
        return self.alignment @ np.diag(self.turn_area)


@dataclass(frozen=True)
class FlexibleSegmentSpec:
    length: float
    stiffness: np.ndarray
    rest_curvature: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mass_per_length: float = 0.0

    kind = "flexible"

    def __post_init__(self):
        K = np.asarray(self.stiffness, dtype=float)
        if K.shape == (3, 3):
            K = np.diag(K)
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "stiffness", _frozen(K, (3,)))
        object.__setattr__(self, "rest_curvature", _frozen(self.rest_curvature, (3,)))
        object.__setattr__(self, "mass_per_length", float(self.mass_per_length))

    @property
    def K(self):
        return np.diag(self.stiffness)


@dataclass(frozen=True)
class RigidSegmentSpec:
    length: float
    actuator: Optional[ActuatorSpec] = None

    kind = "rigid"

    def __post_init__(self):
        object.__setattr__(self, "length", float(self.length))


Segment = Union[FlexibleSegmentSpec, RigidSegmentSpec]


@dataclass(frozen=True)
class CatheterSpec:
    segments: tuple
    tube_inner_radius: float = 0.0
    tube_outer_radius: float = 0.0
    base_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    mass_scale: float = 1e-3
    max_current: float = 0.5
    name: str = "catheter"

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "base_position", _frozen(self.base_position, (3,)))
        object.__setattr__(self, "base_rotation", _frozen(self.base_rotation, (3, 3)))

    @property
    def total_length(self):
        return float(sum(seg.length for seg in self.segments))

    @property
    def actuators(self):
        return [seg.actuator for seg in self.segments
                if isinstance(seg, RigidSegmentSpec) and seg.actuator is not None]

    @property
    def n_actuators(self):
        return len(self.actuators)

    def bounds(self):
        """(start, end) material arclength of each segment."""
        edges = np.concatenate([[0.0], np.cumsum([seg.length for seg in self.segments])])
        return list(zip(edges[:-1], edges[1:]))

    def segment_index(self, s):
        L = self.total_length
        if s < 0 or s > L:
            raise ValueError(f"arclength {s} outside [0, {L}]")
        for i, (a, b) in enumerate(self.bounds()):
            if a <= s < b:
                return i
        return len(self.segments) - 1

    def min_inserted_length(self):
        """Smallest insertion that keeps the base inside the first flexible segment."""
        first = self.segments[0]
        if not isinstance(first, FlexibleSegmentSpec):
            return self.total_length
        return self.total_length - first.length

    def with_material(self, E=None, G=None, segments=None):
        """Copy with every flexible segment's stiffness rebuilt from (E, G)."""
        new = []
        for i, seg in enumerate(self.segments):
            if isinstance(seg, FlexibleSegmentSpec) and (segments is None or i in segments):
                K = annulus_stiffness(E, G, self.tube_inner_radius, self.tube_outer_radius)
                seg = replace(seg, stiffness=K)
            new.append(seg)
        return replace(self, segments=tuple(new))

    def with_actuator(self, **changes):
        """Copy with every actuator's fields replaced by ``changes``."""
        new = []
        for seg in self.segments:
            if isinstance(seg, RigidSegmentSpec) and seg.actuator is not None:
                seg = replace(seg, actuator=replace(seg.actuator, **changes))
            new.append(seg)
        return replace(self, segments=tuple(new))

    def with_density(self, rho):
        new = [replace(seg, mass_per_length=rho) if isinstance(seg, FlexibleSegmentSpec) else seg
               for seg in self.segments]
        return replace(self, segments=tuple(new))


@dataclass(frozen=True)
class ExternalLoads:
    """External loads.

    ``f_tip``, ``gravity`` (mm/s^2), ``distributed_moment`` and ``b_field`` (T)
    are spatial-frame vectors. ``tip_moment`` is expressed in the tip body
    frame, like an actuator moment, and adds to l_tip.
    """
    f_tip: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    distributed_moment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_field: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 3.0]))
    tip_moment: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("f_tip", "gravity", "distributed_moment", "b_field", "tip_moment"):
            v = _frozen(getattr(self, name), (3,))
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class ActuationInput:
    """Coil currents (one 3-vector per actuator) and inserted length."""
    currents: np.ndarray
    inserted_length: float

    def __post_init__(self):
        c = np.array(self.currents, dtype=float)
        c = c.reshape(-1, 3) if c.size else np.zeros((0, 3))
        c.setflags(write=False)
        object.__setattr__(self, "currents", c)
        object.__setattr__(self, "inserted_length", float(self.inserted_length))

    @classmethod
    def zeros(cls, spec: CatheterSpec, inserted_length=None):
        L = spec.total_length if inserted_length is None else inserted_length
        return cls(np.zeros((spec.n_actuators, 3)), L)

    @property
    def size(self):
        return self.currents.size + 1

    def as_vector(self):
        return np.concatenate([self.currents.ravel(), [self.inserted_length]])

    @classmethod
    def from_vector(cls, z):
        z = np.asarray(z, dtype=float)
        return cls(z[:-1].reshape(-1, 3), z[-1])

    def check(self, spec: CatheterSpec, max_current=None):
        errs = []
        if self.currents.shape[0] != spec.n_actuators:
            errs.append(f"currents: expected {spec.n_actuators} actuators")
        zl = self.inserted_length
        if not (0 < zl <= spec.total_length + 1e-12):
            errs.append("inserted_length: must be in (0, total length]")
        elif zl <= spec.min_inserted_length():
            errs.append("inserted_length: base would leave the first flexible segment")
        bound = spec.max_current if max_current is None else max_current
        if self.currents.size and np.max(np.abs(self.currents)) > bound:
            errs.append(f"currents: magnitude above {bound} A")
        return errs


@dataclass(frozen=True)
class ParameterLayout:
    """Which derivative blocks are carried, in the order
    [currents, insertion, u0, p0, R0, f_tip]."""
    n_actuators: int = 1
    currents: bool = True
    insertion: bool = True
    u0: bool = True
    p0: bool = False
    r0: bool = False
    f_tip: bool = False

    def blocks(self):
        sizes = [("currents", 3 * self.n_actuators if self.currents else 0),
                 ("insertion", 1 if self.insertion else 0),
                 ("u0", 3 if self.u0 else 0),
                 ("p0", 3 if self.p0 else 0),
                 ("r0", 3 if self.r0 else 0),
                 ("f_tip", 3 if self.f_tip else 0)]
        out, k = {}, 0
        for name, n in sizes:
            out[name] = slice(k, k + n)
            k += n
        return out

    @property
    def size(self):
        return list(self.blocks().values())[-1].stop

    def __getitem__(self, name):
        return self.blocks()[name]

    @classmethod
    def for_control(cls, spec: CatheterSpec):
        return cls(n_actuators=spec.n_actuators)

    @classmethod
    def full(cls, spec: CatheterSpec):
        return cls(n_actuators=spec.n_actuators, p0=True, r0=True, f_tip=True)


def stiffness_at(spec: CatheterSpec, s):
    """Stiffness matrix K at material arclength ``s``.

    Segments own the half-open interval [start, end); the catheter end
    belongs to the last segment.
    """
    seg = spec.segments[spec.segment_index(s)]
    if not isinstance(seg, FlexibleSegmentSpec):
        raise ValueError(f"arclength {s} lies inside a rigid segment")
    return np.diag(seg.stiffness)


def validate_spec(spec: CatheterSpec):
    """List of 'field: rule' strings; empty when every invariant holds."""
    v = []
    segs = spec.segments
    if not any(isinstance(s, FlexibleSegmentSpec) for s in segs):
        v.append("segments: at least one flexible segment required")
    if segs and not isinstance(segs[0], FlexibleSegmentSpec):
        v.append("segments[0]: base segment must be flexible")
    for i, seg in enumerate(segs):
        name = f"segments[{i}]"
        if not np.isfinite(seg.length) or seg.length <= 0:
            v.append(f"{name}.length: must be > 0")
        if isinstance(seg, FlexibleSegmentSpec):
            if not np.all(seg.stiffness > 0):
                v.append(f"{name}.stiffness: diagonal entries must be > 0")
            if not np.all(np.isfinite(seg.rest_curvature)):
                v.append(f"{name}.rest_curvature: must be finite")
            if seg.mass_per_length < 0:
                v.append(f"{name}.mass_per_length: must be >= 0")
        elif isinstance(seg, RigidSegmentSpec):
            if i > 0 and isinstance(segs[i - 1], RigidSegmentSpec):
                v.append(f"{name}: consecutive rigid segments are not supported")
            act = seg.actuator
            if act is not None:
                if not np.all(np.isfinite(act.turn_area)):
                    v.append(f"{name}.actuator.turn_area: must be finite")
                for ang in ("theta_x", "theta_y"):
                    a = getattr(act, ang)
                    if not (-np.pi < a <= np.pi):
                        v.append(f"{name}.actuator.{ang}: must be in (-pi, pi]")
                if act.coil_mass < 0:
                    v.append(f"{name}.actuator.coil_mass: must be >= 0")
        else:
            v.append(f"{name}: unknown segment type")
    if spec.total_length <= 0:
        v.append("segments: total length must be > 0")
    R0 = spec.base_rotation
    if orthonormality_error(R0) >= ORTHO_TOL:
        v.append("base_rotation: must be orthonormal")
    elif np.linalg.det(R0) <= 0:
        v.append("base_rotation: det must be positive")
    if not np.all(np.isfinite(spec.base_position)):
        v.append("base_position: must be finite")
    if spec.tube_outer_radius < spec.tube_inner_radius or spec.tube_inner_radius < 0:
        v.append("tube radii: need 0 <= inner <= outer")
    if spec.mass_scale <= 0:
        v.append("mass_scale: must be > 0")
    return v


class SpecError(ValueError):
    """Raised for an invalid catheter specification or actuation input."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
