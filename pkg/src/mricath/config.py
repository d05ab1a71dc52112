"""Catheter spec files (YAML) and the shipped defaults."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .model import (ActuatorSpec, CatheterSpec, FlexibleSegmentSpec, RigidSegmentSpec,
                    SpecError, annulus_stiffness, validate_spec)

DEFAULTS = ("pebax35", "qosina")

_TOP = {"name", "tube_inner_radius", "tube_outer_radius", "mass_scale", "max_current",
        "base_pose", "material", "segments"}
_POSE = {"position", "rotation"}
_MATERIAL = {"youngs_modulus", "shear_modulus"}
_FLEX = {"type", "length", "rest_curvature", "mass_per_length", "stiffness",
         "youngs_modulus", "shear_modulus"}
_RIGID = {"type", "length", "actuator"}
_ACT = {"turn_area", "coil_alignment", "coil_mass"}


def _check_keys(d, allowed, where, errors):
    if not isinstance(d, dict):
        errors.append(f"{where}: expected a mapping")
        return False
    for key in d:
        if key not in allowed:
            errors.append(f"{where}.{key}: unknown key")
    return True


def spec_from_dict(d):
    """Build a CatheterSpec, raising SpecError listing every problem found."""
    errors = []
    if not _check_keys(d, _TOP, "spec", errors):
        raise SpecError(errors)
    r_in = float(d.get("tube_inner_radius", 0.0))
    r_out = float(d.get("tube_outer_radius", 0.0))
    mat = d.get("material", {}) or {}
    _check_keys(mat, _MATERIAL, "material", errors)
    pose = d.get("base_pose", {}) or {}
    _check_keys(pose, _POSE, "base_pose", errors)

    segments = []
    for i, sd in enumerate(d.get("segments") or []):
        where = f"segments[{i}]"
        kind = sd.get("type") if isinstance(sd, dict) else None
        if kind == "flexible":
            _check_keys(sd, _FLEX, where, errors)
            if "stiffness" in sd:
                K = np.asarray(sd["stiffness"], dtype=float)
            else:
                E = sd.get("youngs_modulus", mat.get("youngs_modulus"))
                G = sd.get("shear_modulus", mat.get("shear_modulus"))
                if E is None or G is None:
                    errors.append(f"{where}: needs stiffness or youngs/shear modulus")
                    continue
                K = annulus_stiffness(float(E), float(G), r_in, r_out)
            segments.append(FlexibleSegmentSpec(
                length=sd.get("length", 0.0), stiffness=K,
                rest_curvature=sd.get("rest_curvature", [0.0, 0.0, 0.0]),
                mass_per_length=sd.get("mass_per_length", 0.0)))
        elif kind == "rigid":
            _check_keys(sd, _RIGID, where, errors)
            act = None
            ad = sd.get("actuator")
            if ad is not None and _check_keys(ad, _ACT, where + ".actuator", errors):
                tx, ty = ad.get("coil_alignment", [0.0, 0.0])
                act = ActuatorSpec(turn_area=ad["turn_area"], theta_x=tx, theta_y=ty,
                                   coil_mass=ad.get("coil_mass", 0.0))
            segments.append(RigidSegmentSpec(length=sd.get("length", 0.0), actuator=act))
        else:
            errors.append(f"{where}.type: must be 'flexible' or 'rigid'")
    if errors:
        raise SpecError(errors)

    spec = CatheterSpec(
        segments=segments, tube_inner_radius=r_in, tube_outer_radius=r_out,
        base_position=pose.get("position", [0.0, 0.0, 0.0]),
        base_rotation=pose.get("rotation", np.eye(3).tolist()),
        mass_scale=float(d.get("mass_scale", 1e-3)),
        max_current=float(d.get("max_current", 0.5)),
        name=str(d.get("name", "catheter")))
    violations = validate_spec(spec)
    if violations:
        raise SpecError(violations)
    return spec


def spec_to_dict(spec: CatheterSpec):
    segs = []
    for seg in spec.segments:
        if isinstance(seg, FlexibleSegmentSpec):
            segs.append({"type": "flexible", "length": seg.length,
                         "stiffness": seg.stiffness.tolist(),
                         "rest_curvature": seg.rest_curvature.tolist(),
                         "mass_per_length": seg.mass_per_length})
        else:
            sd = {"type": "rigid", "length": seg.length}
            if seg.actuator is not None:
                a = seg.actuator
                sd["actuator"] = {"turn_area": a.turn_area.tolist(),
                                  "coil_alignment": [a.theta_x, a.theta_y],
                                  "coil_mass": a.coil_mass}
            segs.append(sd)
    return {"name": spec.name, "tube_inner_radius": spec.tube_inner_radius,
            "tube_outer_radius": spec.tube_outer_radius, "mass_scale": spec.mass_scale,
            "max_current": spec.max_current,
            "base_pose": {"position": spec.base_position.tolist(),
                          "rotation": spec.base_rotation.tolist()},
            "segments": segs}


def load_spec(source="pebax35"):
    """Load a spec from a YAML path, or by default name ('pebax35', 'qosina')."""
    if str(source) in DEFAULTS:
        text = resources.files("mricath").joinpath(f"data/{source}.yaml").read_text()
    else:
        text = Path(source).read_text()
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecError([f"parse error: {exc}"]) from exc
    return spec_from_dict(d)


def save_spec(spec, path):
    Path(path).write_text(yaml.safe_dump(spec_to_dict(spec), sort_keys=False))
