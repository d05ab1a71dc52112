"""Closed planar test trajectories mapped into the catheter workspace."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHAPES = ("circle", "lemniscate", "rectangle", "butterfly")


@dataclass(frozen=True)
class Waypoint:
    p_des: np.ndarray
    dwell: int = 0


def _circle(n, size):
    t = 2 * np.pi * np.arange(n) / n
    return size * np.column_stack([np.cos(t), np.sin(t)])


def _lemniscate(n, size):
    # Bernoulli lemniscate with half-width ``size``; crosses the centre at t = pi/2, 3pi/2
    t = 2 * np.pi * np.arange(n) / n
    d = 1.0 + np.sin(t) ** 2
    return size * np.column_stack([np.cos(t) / d, np.sin(t) * np.cos(t) / d])


def _rectangle(n, size, aspect=1.0):
    hx, hy = size, size * aspect
    corners = np.array([[hx, -hy], [hx, hy], [-hx, hy], [-hx, -hy]])
    lengths = np.array([2 * hy, 2 * hx, 2 * hy, 2 * hx])
    # points per side by largest remainder, every side starts at its corner
    raw = n * lengths / lengths.sum()
    counts = np.floor(raw).astype(int)
    for k in np.argsort(-(raw - counts))[: n - counts.sum()]:
        counts[k] += 1
    pts = []
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        for i in range(counts[k]):
            pts.append(a + (b - a) * i / counts[k])
    return np.array(pts)


def _butterfly(n, size):
    t = 2 * np.pi * np.arange(n) / n
    r = np.exp(np.sin(t)) - 2 * np.cos(4 * t)
    fine = np.linspace(0, 2 * np.pi, 20001)
    rmax = np.max(np.abs(np.exp(np.sin(fine)) - 2 * np.cos(4 * fine)))
    return size / rmax * np.column_stack([r * np.cos(t), r * np.sin(t)])


def planar_shape(shape, size, n_points, aspect=1.0):
    """(n, 2) points of the shape in its own plane, centred on the origin."""
    if size <= 0:
        raise ValueError("size must be positive")
    if shape == "circle":
        return _circle(n_points, size)
    if shape == "lemniscate":
        return _lemniscate(n_points, size)
    if shape == "rectangle":
        return _rectangle(n_points, size, aspect)
    if shape == "butterfly":
        return _butterfly(n_points, size)
    raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def generate_trajectory(shape, center, size, n_points, plane_orientation=None, aspect=1.0):
    """Waypoints of a closed planar curve.

    The first two columns of ``plane_orientation`` span the plane (identity:
    the spatial x-y plane through ``center``).
    """
    if n_points < 4:
        raise ValueError("n_points must be at least 4")
    P = np.eye(3) if plane_orientation is None else np.asarray(plane_orientation, dtype=float)
    c = np.asarray(center, dtype=float)
    xy = planar_shape(shape, size, n_points, aspect)
    pts = c + xy[:, :1] * P[:, 0] + xy[:, 1:2] * P[:, 1]
    return [Waypoint(p, i) for i, p in enumerate(pts)]


def workspace_plane(tip_position, tip_rotation, standoff=5.0):
    """Plane normal to the undeflected tip tangent, ``standoff`` mm behind the tip."""
    R = np.asarray(tip_rotation, dtype=float)
    return np.asarray(tip_position, dtype=float) - standoff * R[:, 2], R


def waypoint_array(waypoints):
    return np.array([w.p_des for w in waypoints])
