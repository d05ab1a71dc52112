"""
Analytical versus finite-difference Jacobians
=============================================

One augmented integration gives the tip sensitivities to every coil current
and to the insertion. Compare against re-solving the boundary problem with
perturbed inputs, and time both.
"""

import numpy as np

from mricath import ActuationInput, ExternalLoads, assemble_bvp_jacobian, bench_jacobians, fd_bvp_jacobian, load_spec, solve_bvp

spec = load_spec("pebax35")
loads = ExternalLoads()
z = ActuationInput([[0.2, -0.1, 0.25]], 142.0)
sol = solve_bvp(spec, loads, z, tol=1e-12)

Ja = assemble_bvp_jacobian(spec, loads, z, sol)
Jf = fd_bvp_jacobian(spec, loads, z, sol)
np.set_printoptions(precision=5, suppress=True)
print("J_p analytical (columns: i1 i2 i3 insertion)\n", Ja.J_p)
print("J_p finite difference\n", Jf.J_p)
print("max abs difference", np.abs(Ja.J_p - Jf.J_p).max())

# %%
rep = bench_jacobians(spec, loads, sample_count=50, seed=1)
print(f"median analytical {rep['analytical_ms']['median']:.2f} ms, "
      f"FD {rep['fd_ms']['median']:.2f} ms over {rep['samples']} random inputs")
