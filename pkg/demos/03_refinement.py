"""Nonlinear refinement: Gauss-Newton for general linear maps, and the
affine / Euclidean pipelines for homogeneous transforms.

Run: python3 demos/03_refinement.py
"""
import numpy as np

from framesync import affine, direct, gauss_newton
from framesync.instances import InstanceSpec, make_instance
from framesync.objectives import g_prime

inst = make_instance(InstanceSpec(n=25, d=3, sigma=0.3, rho=1.0, transform_class="linear", seed=3))
g, t = inst.graph, inst.observed
start = direct.solve_h(g, t)
sol, state = gauss_newton.run_gn(g, t, start)
print("Gauss-Newton from the H solution")
for k, val in enumerate(state.g_history):
    print(f"  iteration {k}: g = {val:.6f}")
print(f"  g' {g_prime(g, t, start.frames):.5f} -> {g_prime(g, t, sol.frames):.5f} ({state.stopped})")

for cls, run in (("affine", affine.run_affine), ("euclidean", affine.run_euclidean)):
    inst = make_instance(InstanceSpec(n=25, d=3, sigma=0.3, rho=0.5, transform_class=cls, seed=3))
    g, t = inst.graph, inst.observed
    plain = direct.solve_h(g, t).frames
    if cls == "euclidean":
        plain = affine.project_affine(plain, euclidean=True)
    part = run(g, t, refine=False)[0].frames
    full = run(g, t)[0].frames
    print(f"\n{cls}: plain H {g_prime(g, t, plain):.4f}, "
          f"linear+translation {g_prime(g, t, part):.4f}, refined {g_prime(g, t, full):.4f}")
    if cls == "euclidean":
        Q = full[:, :3, :3]
        print(f"  max |Q^T Q - I| = {np.abs(np.swapaxes(Q, 1, 2) @ Q - np.eye(3)).max():.1e}")
