"""
Accuracy and repeatability tables from noisy traces
===================================================

Stand-in for camera data: ten copies of the tracked circle with 0.5 mm
Gaussian noise per axis. Method 1 aligns each trace to the desired shape,
method 2 to a randomly chosen trace.
"""

import numpy as np

from mricath import ActuationInput, ExternalLoads, generate_trajectory, load_spec, solve_bvp, track_trajectory, workspace_plane
from mricath.metrics import accuracy_table, method1_table, method2_table

spec = load_spec("pebax35")
loads = ExternalLoads()
rest = solve_bvp(spec, loads, ActuationInput.zeros(spec))
center, plane = workspace_plane(rest.tip.p, rest.tip.R)
res = track_trajectory(spec, loads, generate_trajectory("circle", center, 10.0, 64, plane))

rng = np.random.default_rng(42)
traces = [res.model_trace + rng.normal(0.0, 0.5, res.model_trace.shape) + [1.0, 0.0, 0.0] for _ in range(10)]

for name, table in (("raw", accuracy_table(traces, res.desired)),
                    ("method 1", method1_table(traces, res.desired)),
                    ("method 2", method2_table(traces, rng))):
    print(f"{name:9s} mean {table['mean']:.3f} mm  variance {table['variance']:.4f}")

# Removing the best rigid motion of n points leaves about 3n - 6 of the
# 3n noise degrees of freedom.
n = len(res.desired)
print("expected method 1 floor", 0.5 * np.sqrt((3 * n - 6) / n))
