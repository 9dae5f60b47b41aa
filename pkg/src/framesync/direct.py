"""Direct (centralized) synchronization.

The Z- and H-methods read frames off the ``d`` smallest right-singular
vectors of a block matrix: row block i of the basis ``V`` is ``G_i^{-1}`` up
to a common right factor, so ``G_i = V_i^{-1}``. The orthogonal pipeline
projects those frames onto O(d) and certifies how far the result can be
from the global optimum.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraph, FrameSyncError, NonQSCGraph, SingularBlock, SingularEdgeMatrix
from .graph import FrameGraph, find_centers, is_connected, is_qsc, random_min_qsc_subgraph
from .matrices import (EdgeTransforms, build_H, build_Z, smallest_singular_subspace,
                       stack_blocks, transform_dim)
from .objectives import edge_residuals, f_value, g_prime, g_value

COND_LIMIT = 1e12


@dataclass
class FrameSolution:
    """Per-frame matrices ``G_i`` representing a left-equivalence class.

    ``frames`` has shape ``(n, d, d)``. The synchronized pairwise transform for
    edge (i, j) is ``G_i^{-1} G_j``.
    """

    frames: np.ndarray
    method: str = ""
    conditioning: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.frames.shape[0]

    @property
    def d(self) -> int:
        return self.frames.shape[1]

    def pairwise(self, i: int, j: int) -> np.ndarray:
        return np.linalg.solve(self.frames[i], self.frames[j])

    def pairwise_set(self, g: FrameGraph) -> dict:
        return {(i, j): self.pairwise(i, j) for i, j in g.sorted_edges()}

    def inverse_frames(self) -> np.ndarray:
        return np.linalg.inv(self.frames)

    def is_equivalent(self, other: "FrameSolution", tol: float = 1e-8) -> bool:
        """True if ``other.frames[i] == Q @ self.frames[i]`` for one common ``Q``."""
        if other.frames.shape != self.frames.shape:
            return False
        Q = other.frames[0] @ np.linalg.inv(self.frames[0])
        err = np.linalg.norm(Q @ self.frames - other.frames, axis=(1, 2))
        scale = np.linalg.norm(other.frames, axis=(1, 2))
        return bool(np.all(err <= tol * np.maximum(scale, 1.0)))


@dataclass
class SyncReport:
    g_total: float
    g_prime: float
    f_value: float
    gap_h: float | None = None
    edge_residuals: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


@dataclass
class GapCertificate:
    h: float
    lower_bound: float
    achieved: float
    exact: bool


def _block_conditioning(blocks: np.ndarray) -> dict:
    s = np.linalg.svd(blocks, compute_uv=False)
    return {"min_sv": s[:, -1].copy(), "max_sv": s[:, 0].copy()}


def frames_from_basis(V: np.ndarray, d: int, method: str = "") -> FrameSolution:
    """Invert the row blocks of an ``(n*d, d)`` basis into frames."""
    blocks = stack_blocks(V, d)
    cond = _block_conditioning(blocks)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = cond["max_sv"] / cond["min_sv"]
    bad = np.flatnonzero(~(ratio <= COND_LIMIT))
    if bad.size:
        raise SingularBlock(f"blocks {bad.tolist()[:5]} have condition number above {COND_LIMIT:g}")
    return FrameSolution(np.linalg.inv(blocks), method, cond)


def solve_z(g: FrameGraph, t: EdgeTransforms) -> FrameSolution:
    """Z-matrix method; requires a quasi-strongly connected graph."""
    if not is_qsc(g):
        raise NonQSCGraph("the Z-matrix method needs a graph with a center")
    d = transform_dim(t)
    V = smallest_singular_subspace(build_Z(g, t, d), d)
    return frames_from_basis(V, d, "z")


def solve_h(g: FrameGraph, t: EdgeTransforms) -> FrameSolution:
    """H-matrix method; requires a connected graph."""
    if not is_connected(g):
        raise DisconnectedGraph("the H-matrix method needs a connected graph")
    d = transform_dim(t)
    V = smallest_singular_subspace(build_H(g, t, d), d)
    return frames_from_basis(V, d, "h")


def _p6_factor(D: np.ndarray, Q: np.ndarray) -> np.ndarray:
    # minimise trace(P^T D P) subject to P^T P = Q: pair the largest
    # eigenvalues of Q with the smallest diagonal entries of D
    w, W = np.linalg.eigh(Q)
    w, W = w[::-1], W[:, ::-1]
    order = np.argsort(np.diag(D), kind="stable")
    E = np.zeros_like(Q)
    E[order, np.arange(len(order))] = 1.0
    return E @ np.diag(np.sqrt(w)) @ W.T


def solve_p3(g: FrameGraph, t: EdgeTransforms, Q: np.ndarray) -> FrameSolution:
    """Frames from the constrained quadratic problem with ``U_1^T U_1 = Q``.

    Solved in two stages: an orthonormal minimiser ``V`` of ``trace(V^T H V)``
    and then the ``d x d`` factor ``P`` with ``P^T P = Q``; ``X = V P``.
    """
    if not is_connected(g):
        raise DisconnectedGraph("the H-matrix method needs a connected graph")
    Q = np.asarray(Q, dtype=float)
    if not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() <= 0:
        raise ValueError("Q must be symmetric positive definite")
    d = transform_dim(t)
    H = build_H(g, t, d)
    V = smallest_singular_subspace(H, d)
    D = V.T @ H @ V
    return frames_from_basis(V @ _p6_factor(D, Q), d, "p3")


def q_independence_check(g: FrameGraph, t: EdgeTransforms, Q1: np.ndarray, Q2: np.ndarray,
                         rtol: float = 1e-8) -> bool:
    """True if two choices of the constraint matrix give the same ``g`` and left-equivalent frames."""
    s1 = solve_p3(g, t, Q1)
    s2 = solve_p3(g, t, Q2)
    g1 = g_value(g, t, s1.frames)
    g2 = g_value(g, t, s2.frames)
    same_g = abs(g1 - g2) <= rtol * max(abs(g1), abs(g2)) + 1e-14
    return bool(same_g and s1.is_equivalent(s2, tol=1e-6))


def polar(M: np.ndarray) -> np.ndarray:
    """Frobenius-nearest orthogonal matrix (works on stacks)."""
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def project_orthogonal(s: FrameSolution) -> FrameSolution:
    return FrameSolution(polar(s.frames), s.method + "+proj" if s.method else "proj", s.conditioning)


def solve_orthogonal(g: FrameGraph, t: EdgeTransforms, method: str = "h") -> tuple[FrameSolution, FrameSolution]:
    """Z- or H-method followed by projection onto O(d); returns (unprojected, projected)."""
    raw = solve_h(g, t) if method == "h" else solve_z(g, t)
    return raw, project_orthogonal(raw)


def gap_certificate(s_unprojected: FrameSolution, s_projected: FrameSolution,
                    g: FrameGraph, t: EdgeTransforms) -> GapCertificate:
    """Relative gap between the projected objective and the relaxation lower bound.

    ``s_unprojected`` must come from the H-method with an orthonormal basis,
    i.e. its inverse frames stack to a matrix with orthonormal columns.
    """
    n, d = s_unprojected.n, s_unprojected.d
    X = s_unprojected.inverse_frames()
    gram = X.reshape(n * d, d).T @ X.reshape(n * d, d)
    if not np.allclose(gram, np.eye(d), atol=1e-6):
        raise ValueError("unprojected frames must come from an orthonormal basis")
    lower = f_value(g, t, np.sqrt(n) * X)
    homogeneous = n * f_value(g, t, X)
    if not np.isclose(lower, homogeneous, rtol=1e-10, atol=1e-14):
        raise FrameSyncError(f"scaling mismatch in the lower bound: {lower} vs {homogeneous}")
    achieved = g_value(g, t, s_projected.frames)
    if lower <= 1e-14 * max(len(g.edges), 1):
        return GapCertificate(0.0, lower, achieved, True)
    return GapCertificate((achieved - lower) / lower, lower, achieved, False)


def gap_bound(s_unprojected: FrameSolution, s_projected: FrameSolution,
              g: FrameGraph, t: EdgeTransforms) -> float:
    return gap_certificate(s_unprojected, s_projected, g, t).h


def reference_baseline(g: FrameGraph, t: EdgeTransforms, rng: np.random.Generator) -> FrameSolution:
    """Propagate frames along a random spanning tree rooted at a center.

    The center gets the identity; every other node i with tree edge (i, j)
    gets ``G_i = G_j G_ij^{-1}``.
    """
    if not find_centers(g):
        raise NonQSCGraph("the reference method needs a graph with a center")
    d = transform_dim(t)
    tree = random_min_qsc_subgraph(g, rng)
    parent = {i: j for i, j in tree.edges}
    root = next(v for v in range(g.n) if v not in parent)
    frames = np.empty((g.n, d, d))
    frames[root] = np.eye(d)
    children: dict[int, list[int]] = {}
    for i, j in tree.sorted_edges():
        children.setdefault(j, []).append(i)
    stack = [root]
    while stack:
        j = stack.pop()
        for i in children.get(j, []):
            Gij = np.asarray(t[i, j], dtype=float)
            if np.linalg.cond(Gij) > COND_LIMIT:
                raise SingularEdgeMatrix(f"tree edge {(i, j)} is numerically singular")
            frames[i] = frames[j] @ np.linalg.inv(Gij)
            stack.append(i)
    return FrameSolution(frames, "ref")


def metrics(g: FrameGraph, t_observed: EdgeTransforms, s: FrameSolution) -> SyncReport:
    start = time.perf_counter()
    R = edge_residuals(g, t_observed, s.frames)
    per_edge = {e: float(np.sum(r * r)) for e, r in zip(g.sorted_edges(), R)}
    report = SyncReport(
        g_total=g_value(g, t_observed, s.frames),
        g_prime=g_prime(g, t_observed, s.frames),
        f_value=f_value(g, t_observed, s.inverse_frames()),
        edge_residuals=per_edge,
    )
    report.timings["metrics_s"] = time.perf_counter() - start
    return report
