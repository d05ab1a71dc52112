import numpy as np
import pytest

from mricath import (ActuationInput, ExternalLoads, IKConfig, UnreachableWaypoint, dls_step, generate_trajectory,
                     replay, solve_bvp, track_trajectory, workspace_plane)
from mricath.trajectories import SHAPES, Waypoint, planar_shape


class TestDls:
    rng = np.random.default_rng(0)
    J = rng.normal(size=(3, 4))
    dp = rng.normal(size=3)

    def test_normal_equation_residual(self):
        lam = 0.1
        dz = dls_step(self.J, self.dp, lam)
        A = self.J @ self.J.T + lam**2 * np.eye(3)
        y = np.linalg.lstsq(self.J.T, dz, rcond=None)[0]
        assert np.linalg.norm(A @ y - self.dp) < 1e-10 * np.linalg.norm(self.dp)

    def test_damping_monotone(self):
        norms = [np.linalg.norm(dls_step(self.J, self.dp, lam)) for lam in (0.0, 0.01, 0.1, 1.0, 10.0)]
        assert all(a >= b for a, b in zip(norms, norms[1:]))

    def test_trivial_cases(self):
        assert np.array_equal(dls_step(self.J, np.zeros(3), 0.1), np.zeros(4))
        J = np.hstack([np.eye(3), np.zeros((3, 1))])
        assert np.allclose(dls_step(J, self.dp, 0.0), np.r_[self.dp, 0.0])

    def test_large_damping_limit(self):
        lam = 1e4
        dz = dls_step(self.J, self.dp, lam)
        approx = self.J.T @ self.dp / lam**2
        assert np.allclose(dz / approx, 1.0, rtol=1e-2)


def _plane(spec, loads):
    sol = solve_bvp(spec, loads, ActuationInput.zeros(spec))
    return workspace_plane(sol.tip.p, sol.tip.R, 5.0)


class TestTracking:
    def test_waypoint_at_tip(self, pebax, no_loads):
        res = track_trajectory(pebax, no_loads, [Waypoint(np.array([0.0, 0.0, 146.0]))])
        assert res.waypoints[0].inner_iters == 0 and res.steps == []
        assert np.array_equal(res.waypoints[0].z, ActuationInput.zeros(pebax).as_vector())

    def test_circle_model_as_plant(self, pebax, no_loads):
        c, P = _plane(pebax, no_loads)
        wps = generate_trajectory("circle", c, 10.0, 32, P)
        res = track_trajectory(pebax, no_loads, wps)
        assert all(w.converged for w in res.waypoints)
        err = np.linalg.norm(res.model_trace - res.desired, axis=1)
        assert err.max() < 1e-3
        assert np.sqrt(np.mean(err**2)) < 1e-3
        assert max(w.inner_iters for w in res.waypoints) <= 20
        for s in res.steps:
            dz = s.z_after - s.z_before
            assert np.max(np.abs(dz[:-1])) <= 0.05 + 1e-12 and abs(dz[-1]) <= 1.0 + 1e-12

    def test_replay_bit_identical(self, pebax, no_loads):
        c, P = _plane(pebax, no_loads)
        wps = generate_trajectory("lemniscate", c, 8.0, 12, P)
        a = track_trajectory(pebax, no_loads, wps)
        b = track_trajectory(pebax, no_loads, wps)
        assert np.array_equal(a.model_trace, b.model_trace)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(replay(pebax, no_loads, a), a.model_trace)

    def test_current_clamp_respected(self, pebax, no_loads):
        cfg = IKConfig(max_current_step=0.01, max_insertion_step=0.2, max_inner=400)
        c, P = _plane(pebax, no_loads)
        res = track_trajectory(pebax, no_loads, generate_trajectory("rectangle", c, 6.0, 8, P), cfg)
        for s in res.steps:
            dz = s.z_after - s.z_before
            assert np.max(np.abs(dz[:-1])) <= 0.01 + 1e-12 and abs(dz[-1]) <= 0.2 + 1e-12

    def test_unreachable(self, pebax, no_loads):
        with pytest.raises(UnreachableWaypoint) as exc:
            track_trajectory(pebax, no_loads, [Waypoint(np.array([0.0, 0.0, 300.0]))])
        assert exc.value.index == 0 and len(exc.value.result.waypoints) == 1

    def test_fd_jacobian_mode(self, pebax, no_loads):
        c, P = _plane(pebax, no_loads)
        wps = generate_trajectory("circle", c, 5.0, 4, P)
        res = track_trajectory(pebax, no_loads, wps, IKConfig(jacobian="fd"))
        assert all(w.converged for w in res.waypoints)


class TestTrajectories:
    def test_circle_four(self):
        pts = planar_shape("circle", 2.0, 4)
        assert np.allclose(pts, [[2, 0], [0, 2], [-2, 0], [0, -2]], atol=1e-15)

    def test_rectangle_corners(self):
        pts = planar_shape("rectangle", 3.0, 16)
        for corner in ([3, -3], [3, 3], [-3, 3], [-3, -3]):
            assert np.any(np.all(pts == corner, axis=1))
        assert len(pts) == 16

    @pytest.mark.parametrize("shape", SHAPES)
    def test_shapes_in_plane(self, shape):
        rng = np.random.default_rng(1)
        P = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        c = np.array([1.0, 2.0, 3.0])
        pts = np.array([w.p_des for w in generate_trajectory(shape, c, 5.0, 40, P)])
        assert np.allclose((pts - c) @ P[:, 2], 0.0, atol=1e-12)
        assert np.max(np.linalg.norm(pts - c, axis=1)) <= 5.0 * np.sqrt(2) + 1e-12

    def test_butterfly_scaled(self):
        r = np.linalg.norm(planar_shape("butterfly", 4.0, 2000), axis=1)
        assert r.max() == pytest.approx(4.0, rel=1e-3)

    def test_lemniscate_crosses_centre(self):
        pts = planar_shape("lemniscate", 3.0, 8)
        assert np.allclose(pts[2], 0.0, atol=1e-15) and np.allclose(pts[6], 0.0, atol=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            generate_trajectory("circle", np.zeros(3), 1.0, 3)
        with pytest.raises(ValueError):
            planar_shape("spiral", 1.0, 10)
        with pytest.raises(ValueError):
            planar_shape("circle", -1.0, 10)
