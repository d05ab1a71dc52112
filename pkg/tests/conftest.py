import numpy as np
import pytest

from mricath import ExternalLoads, load_spec
from mricath.lie import rot_x, rot_z
from mricath.model import CatheterSpec, FlexibleSegmentSpec


@pytest.fixture(scope="session")
def pebax():
    return load_spec("pebax35")


@pytest.fixture(scope="session")
def qosina():
    return load_spec("qosina")


@pytest.fixture
def no_loads():
    return ExternalLoads()


def uniform_rod(length=100.0, k=(50.0, 50.0, 30.0), ustar=(0.0, 0.0, 0.0)):
    seg = FlexibleSegmentSpec(length, np.array(k), np.array(ustar))
    return CatheterSpec((seg,), name="uniform")


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                     [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                     [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)]])


def grid_oracle(trace, reference, coarse=720, zoom=4):
    """Best RMSE over in-plane rotations (with and without a flip) of planar
    x-y point sets, by repeated grid refinement of the angle."""
    A = trace - trace.mean(axis=0)
    B = reference - reference.mean(axis=0)
    best = np.inf
    for flip in (np.eye(3), rot_x(np.pi)):
        lo, hi, n = 0.0, 2 * np.pi, coarse
        for _ in range(zoom + 1):
            th = np.linspace(lo, hi, n, endpoint=False)
            vals = [np.sqrt(np.mean(np.sum((A @ (rot_z(t) @ flip).T - B) ** 2, axis=1))) for t in th]
            k = int(np.argmin(vals))
            step = (hi - lo) / n
            lo, hi, n = th[k] - 2 * step, th[k] + 2 * step, 200
        best = min(best, min(vals))
    return best
