"""Trajectory error metrics: paired RMSE and RMSE after optimal rigid alignment."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

COLLINEAR_TOL = 1e-9


def _points(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError("expected an (n, 3) point list")
    return a


def rmse(trace, reference):
    """Root mean square of the paired Euclidean distances."""
    a, b = _points(trace), _points(reference)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


@dataclass(frozen=True)
class Alignment:
    rmse: float
    rotation: np.ndarray
    translation: np.ndarray
    degenerate: bool

    def apply(self, points):
        return _points(points) @ self.rotation.T + self.translation


def rigid_align(trace, reference):
    """Rotation + translation (no scaling) taking ``trace`` closest to ``reference``.

    Kabsch/Procrustes with a determinant correction so the result is a proper
    rotation. ``degenerate`` is set when the reference is collinear, in which
    case the rotation about that line is arbitrary (the RMSE is not).
    """
    a, b = _points(trace), _points(reference)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 3:
        raise ValueError("need at least 3 points")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    A, B = a - ca, b - cb
    sv = np.linalg.svd(B, compute_uv=False)
    degenerate = bool(sv[1] <= COLLINEAR_TOL * max(sv[0], 1.0))
    U, _, Vt = np.linalg.svd(A.T @ B)
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = cb - R @ ca
    err = float(np.sqrt(np.mean(np.sum((A @ R.T - B) ** 2, axis=1))))
    return Alignment(err, R, t, degenerate)


def aligned_rmse(trace, reference):
    """RMSE remaining after the best rigid alignment of ``trace`` onto ``reference``."""
    al = rigid_align(trace, reference)
    if al.degenerate:
        warnings.warn("reference trajectory is collinear; alignment rotation is not unique")
    return al.rmse


def _row(values):
    v = np.asarray(values, dtype=float)
    return {"mean": float(v.mean()), "variance": float(v.var(ddof=1)) if v.size > 1 else 0.0,
            "trials": [float(x) for x in v]}


def accuracy_table(traces, desired):
    """Raw paired RMSE of every observed trace against the desired points."""
    return _row([rmse(t, desired) for t in traces])


def method1_table(traces, desired):
    """Aligned RMSE of each observed trace against the desired trajectory."""
    return _row([aligned_rmse(t, desired) for t in traces])


def method2_table(traces, rng):
    """Aligned RMSE of each trace against one randomly chosen trace.

    The reference trace's own entry is reported as None and excluded from
    mean and variance.
    """
    if len(traces) < 2:
        raise ValueError("method 2 needs at least two traces")
    ref = int(rng.integers(len(traces)))
    vals = [aligned_rmse(t, traces[ref]) for i, t in enumerate(traces) if i != ref]
    out = _row(vals)
    trials = out["trials"]
    trials.insert(ref, None)
    out["reference_index"] = ref
    return out
