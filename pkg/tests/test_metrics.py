import warnings

import numpy as np
import pytest

from conftest import grid_oracle, random_rotation
from mricath import aligned_rmse, rigid_align, rmse
from mricath.lie import rot_z
from mricath.metrics import accuracy_table, method1_table, method2_table


def test_rmse_examples():
    a = np.random.default_rng(0).normal(size=(5, 3))
    assert rmse(a, a) == 0.0
    assert rmse(a + [3.0, 4.0, 0.0], a) == pytest.approx(5.0)
    assert rmse(np.zeros((2, 3)), [[1, 0, 0], [0, 1, 0]]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rmse(a, a[:4])


def test_rigid_copy_aligns_exactly():
    rng = np.random.default_rng(1)
    for _ in range(10):
        ref = rng.normal(size=(20, 3))
        R = random_rotation(rng)
        trace = ref @ R.T + rng.normal(size=3) * 10
        assert aligned_rmse(trace, ref) < 1e-10


def test_scaling_not_removed():
    ref = np.random.default_rng(2).normal(size=(12, 3))
    assert aligned_rmse(1.1 * ref, ref) > 1e-3


def test_square_with_displaced_corner():
    sq = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    moved = sq.copy()
    moved[2, 0] += 1.0
    assert aligned_rmse(moved, sq) == pytest.approx(grid_oracle(moved, sq), abs=1e-6)


def test_planar_traces_match_grid():
    rng = np.random.default_rng(3)
    for _ in range(5):
        ref = np.c_[rng.normal(size=(15, 2)), np.zeros(15)]
        tr = ref @ rot_z(rng.uniform(0, 6)).T + np.c_[rng.normal(size=(15, 2)) * 0.3, np.zeros(15)]
        assert aligned_rmse(tr, ref) == pytest.approx(grid_oracle(tr, ref), abs=1e-6)


def test_reflection_is_not_allowed():
    # a mirrored non-symmetric planar set would align exactly with a reflection
    ref = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0], [0.3, 0.2, 0.5]])
    mirror = ref * [1, 1, -1] + [0, 0, 0]
    al = rigid_align(mirror, ref)
    assert np.linalg.det(al.rotation) == pytest.approx(1.0)


def test_argmin_against_probes():
    rng = np.random.default_rng(4)
    ref = rng.normal(size=(25, 3))
    tr = ref @ random_rotation(rng).T + rng.normal(size=(25, 3)) * 0.2
    al = rigid_align(tr, ref)
    for _ in range(1000):
        dR = random_rotation(rng) if rng.random() < 0.2 else np.linalg.qr(np.eye(3) + 0.05 * rng.normal(size=(3, 3)))[0]
        if np.linalg.det(dR) < 0:
            dR[:, 0] *= -1
        R = dR @ al.rotation
        t = al.translation + rng.normal(size=3) * 0.05
        assert rmse(tr @ R.T + t, ref) >= al.rmse - 1e-12


def test_collinear_flagged():
    ref = np.c_[np.arange(5.0), np.zeros(5), np.zeros(5)]
    assert rigid_align(ref + 1.0, ref).degenerate
    with pytest.warns(UserWarning):
        aligned_rmse(ref, ref)


def test_tables():
    rng = np.random.default_rng(5)
    des = rng.normal(size=(10, 3))
    same = [des.copy() for _ in range(10)]
    t2 = method2_table(same, np.random.default_rng(0))
    assert t2["mean"] == pytest.approx(0.0, abs=1e-12) and t2["variance"] == pytest.approx(0.0, abs=1e-20)
    assert t2["trials"][t2["reference_index"]] is None and len(t2["trials"]) == 10
    shifted = [des + [1.0, -2.0, 0.5] for _ in range(3)]
    assert method1_table(shifted, des)["mean"] == pytest.approx(0.0, abs=1e-12)
    assert accuracy_table(shifted, des)["mean"] == pytest.approx(np.sqrt(5.25))
    with pytest.raises(ValueError):
        method2_table([des], rng)
