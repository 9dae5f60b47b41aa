"""Each node keeps only its own state and talks to its graph neighbours.

The synchronous protocol is one step of explicit Euler on dX/dt = -M X, so
after enough rounds the state settles into the slow subspace that the
centralised solver computes in one shot. The gradient flow afterwards
polishes an orthogonal solution on the product of rotation groups.

Run: python3 demos/04_distributed_and_flow.py
"""
from framesync import direct, distributed, gradient_flow
from framesync.instances import InstanceSpec, make_instance
from framesync.objectives import g_prime

inst = make_instance(InstanceSpec(n=30, d=3, sigma=0.3, rho=0.5, seed=4))
g, t = inst.graph, inst.observed

for variant in ("z", "h"):
    cfg = distributed.ProtocolConfig(variant, epsilon=0.01, rounds=3000, seed=4, trace_every=500)
    sol, trace = distributed.run_distributed(g, t, cfg)
    central = g_prime(g, t, direct.solve_orthogonal(g, t, variant)[1].frames)
    print(f"{variant.upper()} protocol (epsilon 0.01)")
    for row in trace:
        print(f"  round {row.round:5d}  g' {row.g_prime:.5f}  max |X_i| {row.max_state_norm:.2e}")
    print(f"  centralised g' {central:.5f}\n")

flow_sol, rep, state = gradient_flow.run_flow(g, t, T=5.0)
_, start = direct.solve_orthogonal(g, t, "h")
print(f"gradient flow: g' {g_prime(g, t, start.frames):.6f} -> {rep.g_prime:.6f} "
      f"after {state.steps} steps ({state.rejected} rejected, stop: {state.stopped})")
