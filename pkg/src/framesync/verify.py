"""Quick invariant checks on small random instances, used by ``framesync verify``."""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import affine, direct, distributed, gauss_newton, gradient_flow
from .graph import FrameGraph
from .instances import InstanceSpec, make_instance
from .matrices import build_H, build_Z, kernel_dimension
from .objectives import f_value, g_prime, g_value


def _fd_gradient(fun, x, h=1e-6):
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (fun(xp) - fun(xm)) / (2 * h)
    return grad


def check_tree_exact() -> float:
    inst = make_instance(InstanceSpec(n=12, d=3, sigma=0.5, rho=0.0, transform_class="linear", seed=1))
    return max(g_prime(inst.graph, inst.observed, direct.solve_z(inst.graph, inst.observed).frames),
               g_prime(inst.graph, inst.observed, direct.solve_h(inst.graph, inst.observed).frames))


def check_kernel_dimension() -> float:
    inst = make_instance(InstanceSpec(n=8, d=3, sigma=0.0, rho=0.3, transform_class="linear", seed=2))
    return float(abs(kernel_dimension(build_H(inst.graph, inst.consistent)) - 3))


def check_hessian() -> float:
    inst = make_instance(InstanceSpec(n=4, d=2, sigma=0.3, rho=0.5, transform_class="linear", seed=3))
    g, t = inst.graph, inst.observed
    H = build_H(g, t)
    X = np.random.default_rng(0).standard_normal((8, 2))
    grad = _fd_gradient(lambda Y: f_value(g, t, Y.reshape(4, 2, 2)), X)
    return float(np.linalg.norm(grad - H @ X) / np.linalg.norm(H @ X))


def check_gn_gradient() -> float:
    inst = make_instance(InstanceSpec(n=4, d=2, sigma=0.3, rho=0.5, transform_class="linear", seed=4))
    g, t = inst.graph, inst.observed
    F = inst.truth + 0.2 * np.random.default_rng(1).standard_normal(inst.truth.shape)
    sys = gauss_newton.build_gn_system(g, t, F)
    grad = gauss_newton.vec(_fd_gradient(lambda G: g_value(g, t, G), F)).ravel()
    return float(np.linalg.norm(grad - sys.c) / np.linalg.norm(sys.c))


def check_affine_split() -> float:
    inst = make_instance(InstanceSpec(n=6, d=3, sigma=0.3, rho=0.5, transform_class="affine", seed=5))
    g, t = inst.graph, inst.observed
    F = inst.truth.copy()
    F[:, :3, :3] += 0.1 * np.random.default_rng(2).standard_normal((6, 3, 3))
    Q, tv = F[:, :3, :3], F[:, :3, 3]
    split = (g_value(g, affine.linear_parts(t), Q)
             + affine.translation_objective(g, Q, affine.translation_parts(t), tv))
    return abs(g_value(g, t, F) - split) / g_value(g, t, F)


def check_flow_tangent() -> float:
    inst = make_instance(InstanceSpec(n=6, d=3, sigma=0.3, rho=0.5, seed=6))
    F = np.stack([direct.polar(M) for M in np.random.default_rng(3).standard_normal((6, 3, 3))])
    S = np.swapaxes(F, 1, 2) @ gradient_flow.flow_rhs(inst.graph, inst.observed, F)
    return float(np.abs(S + np.swapaxes(S, 1, 2)).max())


def check_z_spectrum() -> float:
    inst = make_instance(InstanceSpec(n=10, d=3, sigma=0.3, rho=0.3, seed=7))
    Z = build_Z(inst.graph, inst.observed)
    w = np.linalg.eigvals(Z)
    return float(max(0.0, -w.real.min()) / np.linalg.norm(Z, 2))


def check_simulator() -> float:
    inst = make_instance(InstanceSpec(n=8, d=3, sigma=0.3, rho=0.5, seed=8))
    worst = 0.0
    for variant in "zh":
        sim = distributed.init_network(inst.graph, inst.observed, distributed.ProtocolConfig(variant))
        X0 = sim.X.copy()
        distributed.step(sim, 50)
        M = distributed.protocol_matrix(inst.graph, inst.observed, variant)
        ref = distributed.matrix_power_reference(M, X0, sim.epsilon, 50)
        worst = max(worst, float(np.abs(sim.X - ref).max()))
    return worst


def check_gn_identity_blocks() -> float:
    g = FrameGraph(2, frozenset({(0, 1)}))
    sys = gauss_newton.build_gn_system(g, {(0, 1): np.eye(2)}, np.stack([np.eye(2)] * 2))
    expected = np.block([[np.eye(4), -np.eye(4)], [-np.eye(4), np.eye(4)]])
    return float(np.abs(sys.H - expected).max() + np.abs(sys.c).max())


CHECKS: dict[str, tuple[Callable[[], float], float]] = {
    "spanning-tree exactness": (check_tree_exact, 1e-10),
    "kernel dimension of H": (check_kernel_dimension, 0.5),
    "H equals Hessian of f": (check_hessian, 1e-5),
    "GN vector equals gradient of g": (check_gn_gradient, 1e-5),
    "GN blocks at identity": (check_gn_identity_blocks, 1e-14),
    "affine objective split": (check_affine_split, 1e-10),
    "flow tangency": (check_flow_tangent, 1e-10),
    "Z spectrum in closed right half-plane": (check_z_spectrum, 1e-10),
    "simulator equals matrix power": (check_simulator, 1e-9),
}


def run_checks() -> list[tuple[str, bool, float]]:
    out = []
    for name, (fn, tol) in CHECKS.items():
        value = fn()
        out.append((name, bool(value <= tol), value))
    return out
