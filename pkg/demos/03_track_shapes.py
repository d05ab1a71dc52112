"""
Open-loop tracking of the four test shapes
==========================================

The forward model stands in for the catheter: each waypoint is reached by
damped least-squares steps using only model predictions.
"""

import numpy as np

from mricath import ActuationInput, ExternalLoads, generate_trajectory, load_spec, solve_bvp, track_trajectory, workspace_plane
from mricath.trajectories import SHAPES

spec = load_spec("pebax35")
loads = ExternalLoads()
rest = solve_bvp(spec, loads, ActuationInput.zeros(spec))
# shapes live in the plane normal to the straight tip, 5 mm behind it
center, plane = workspace_plane(rest.tip.p, rest.tip.R, standoff=5.0)

for shape in SHAPES:
    wps = generate_trajectory(shape, center, 10.0, 64, plane)
    res = track_trajectory(spec, loads, wps)
    err = np.linalg.norm(res.model_trace - res.desired, axis=1)
    ms = res.step_ms()
    cur = np.abs(res.inputs[:, :3]).max()
    print(f"{shape:10s} max err {err.max():.1e} mm  steps {ms.size:3d}  mean {ms.mean():.2f} ms  "
          f"peak current {cur:.3f} A  insertion {res.inputs[:, 3].min():.1f}-{res.inputs[:, 3].max():.1f} mm")
