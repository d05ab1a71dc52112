"""
Bending the catheter with one coil
==================================

Solve the shooting problem for the Pebax prototype while sweeping the
current in one side coil, and watch the tip leave the scanner axis.
"""

import numpy as np

from mricath import ActuationInput, ExternalLoads, load_spec, solve_bvp

spec = load_spec("pebax35")
loads = ExternalLoads()          # 3 T along z, no gravity

# warm-start each solve from the previous base curvature
u0 = None
for i1 in np.linspace(0.0, 0.4, 5):
    z = ActuationInput([[i1, 0.0, 0.0]], spec.total_length)
    sol = solve_bvp(spec, loads, z, u0)
    u0 = sol.u0_plus
    p = sol.tip.p
    print(f"i1 = {i1:4.2f} A  tip = [{p[0]:7.3f} {p[1]:7.3f} {p[2]:8.3f}] mm  "
          f"({sol.iterations} iterations, residual {sol.residual_norm:.1e})")

# %%
# Retracting pulls the coil set towards the base: the bending lever between
# base and actuator shrinks, so the same current deflects the tip less.
for zl in (146.0, 135.0, 125.0):
    sol = solve_bvp(spec, loads, ActuationInput([[0.2, 0.0, 0.0]], zl))
    print(f"inserted {zl:5.1f} mm -> tip x {sol.tip.p[0]:6.3f} mm, z {sol.tip.p[2]:7.3f} mm")
