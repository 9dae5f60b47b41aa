"""Block Gauss-Newton refinement of per-frame matrices.

Each edge residual ``R_ij = G_ij - G_i^{-1} G_j`` is linearised in the steps
``E_i``; with column-major ``vec`` its Jacobian blocks are

    d vec R / d vec E_i = (G_i^{-1} G_j)^T kron G_i^{-1}
    d vec R / d vec E_j = -(I kron G_i^{-1})

and the normal equations ``H_GN x = -c_GN`` use ``H_GN = J^T J`` and
``c_GN = J^T vec R``. Steps are stacked frame by frame, ``x = [vec E_1; ...]``.

An optional residual weight mask scales individual matrix entries of every
residual; the affine solver uses it to weight linear parts against
translations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .direct import FrameSolution, solve_h
from .errors import ConvergenceError, SingularBlock
from .graph import FrameGraph
from .matrices import EdgeTransforms
from .objectives import edge_arrays

DIRECT_LIMIT = 4000


@dataclass
class GNSystem:
    H: np.ndarray | sp.spmatrix
    c: np.ndarray
    n: int
    d: int

    @property
    def size(self) -> int:
        return self.n * self.d * self.d

    def block(self, i: int, j: int) -> np.ndarray:
        k = self.d * self.d
        B = self.H[i * k:(i + 1) * k, j * k:(j + 1) * k]
        return B.toarray() if sp.issparse(B) else np.asarray(B)


@dataclass
class GNState:
    frames: np.ndarray
    steps: np.ndarray | None = None
    iteration: int = 0
    g_history: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    stopped: str = ""


def vec(M: np.ndarray) -> np.ndarray:
    """Column-stacking vectorisation (works on stacks of matrices)."""
    return np.swapaxes(M, -1, -2).reshape(M.shape[:-2] + (-1,))


def unvec(x: np.ndarray, d: int) -> np.ndarray:
    """Inverse of ``vec`` for a stacked step vector: returns ``(n, d, d)``."""
    return np.swapaxes(np.asarray(x).reshape(-1, d, d), -1, -2)


def _kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # batched Kronecker product of two stacks of square matrices
    m, a = A.shape[:2]
    b = B.shape[1]
    return np.einsum("kac,kbe->kabce", A, B).reshape(m, a * b, a * b)


def weighted_g(g: FrameGraph, t: EdgeTransforms, frames: np.ndarray,
               weights: np.ndarray | None = None) -> float:
    """``g`` with each residual entry squared-weighted by ``weights`` (a d x d mask)."""
    src, dst, Gs = edge_arrays(g, t)
    if src.size == 0:
        return 0.0
    try:
        inv = np.linalg.inv(frames)
    except np.linalg.LinAlgError:
        return np.inf
    R = Gs - inv[src] @ frames[dst]
    if weights is not None:
        R = R * np.sqrt(weights)
    val = 0.5 * float(np.sum(R * R))
    return val if np.isfinite(val) else np.inf


def build_gn_system(g: FrameGraph, t: EdgeTransforms, frames: np.ndarray,
                    weights: np.ndarray | None = None, sparse: bool | None = None) -> GNSystem:
    frames = np.asarray(frames, dtype=float)
    n, d = frames.shape[0], frames.shape[1]
    k = d * d
    s = np.linalg.svd(frames, compute_uv=False)
    if np.any(s[:, -1] <= 1e-12 * s[:, 0]):
        raise SingularBlock("a frame is singular; the Gauss-Newton system is undefined")
    src, dst, Gs = edge_arrays(g, t)
    m = src.size
    inv = np.linalg.inv(frames)
    Ii = inv[src]
    P = Ii @ frames[dst]
    R = Gs - P
    eye = np.broadcast_to(np.eye(d), (m, d, d))
    Js = _kron(np.swapaxes(P, 1, 2), Ii)
    Jd = -_kron(eye, Ii)
    w = np.ones(k) if weights is None else vec(np.asarray(weights, dtype=float))
    JsT = np.swapaxes(Js, 1, 2) * w
    JdT = np.swapaxes(Jd, 1, 2) * w
    r = vec(R)

    c = np.zeros((n, k))
    np.add.at(c, src, np.einsum("kab,kb->ka", JsT, r))
    np.add.at(c, dst, np.einsum("kab,kb->ka", JdT, r))

    blocks = np.concatenate([JsT @ Js, JsT @ Jd, JdT @ Js, JdT @ Jd]) if m else np.zeros((0, k, k))
    brow = np.concatenate([src, src, dst, dst])
    bcol = np.concatenate([src, dst, src, dst])
    a, b = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    rows = (brow[:, None, None] * k + a).ravel()
    cols = (bcol[:, None, None] * k + b).ravel()
    H = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n * k, n * k)).tocsr()
    use_sparse = n * k > DIRECT_LIMIT if sparse is None else sparse
    if not use_sparse:
        H = H.toarray()
        H = 0.5 * (H + H.T)
    return GNSystem(H, c.ravel(), n, d)


def gauge_basis(frames: np.ndarray) -> np.ndarray:
    """Columns spanning the steps ``E_i = M G_i``, which leave every ``G_i^{-1} G_j`` fixed to first order."""
    n, d = frames.shape[0], frames.shape[1]
    eye = np.eye(d)
    return np.concatenate([np.kron(G.T, eye) for G in frames])


def min_norm_solve(A: np.ndarray, b: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Minimum-norm least-squares solution of a symmetric PSD system via its eigendecomposition."""
    w, V = np.linalg.eigh(A)
    cut = rtol * max(np.abs(w).max(initial=0.0), np.finfo(float).tiny)
    inv = np.zeros_like(w)
    keep = w > cut
    inv[keep] = 1.0 / w[keep]
    return V @ (inv * (V.T @ b))


def _solve(H, rhs: np.ndarray, kernel: np.ndarray | None = None) -> np.ndarray:
    if not sp.issparse(H):
        return min_norm_solve(H, rhs)
    diag = H.diagonal()
    diag = np.where(diag > 0, diag, 1.0)
    M = spla.LinearOperator(H.shape, matvec=lambda v: v / diag)
    x, info = spla.cg(H, rhs, rtol=1e-12, atol=0.0, M=M, maxiter=10 * H.shape[0])
    if info != 0:
        raise ConvergenceError(f"conjugate gradient stopped with info={info}")
    if kernel is not None:
        # preconditioning may leave a gauge component; remove it for the minimum-norm step
        x = x - kernel @ np.linalg.lstsq(kernel, x, rcond=None)[0]
    return x


def gn_step(sys: GNSystem, frames: np.ndarray | None = None) -> np.ndarray:
    """Steps ``E_i`` (shape ``(n, d, d)``) from the minimum-norm solution of ``H_GN x = -c_GN``.

    ``frames`` is only used by the iterative solver to strip gauge components.
    """
    if not np.any(sys.c):
        return np.zeros((sys.n, sys.d, sys.d))
    kernel = gauge_basis(frames) if frames is not None and sp.issparse(sys.H) else None
    x = _solve(sys.H, -sys.c, kernel)
    return unvec(x, sys.d)


def relative_residual(sys: GNSystem, steps: np.ndarray) -> float:
    x = vec(steps).ravel()
    nc = np.linalg.norm(sys.c)
    return float(np.linalg.norm(sys.H @ x + sys.c) / nc) if nc else 0.0


def gn_loop(g: FrameGraph, t: EdgeTransforms, frames: np.ndarray, max_iters: int = 5,
            rel_tol: float = 1e-8, damping: bool = True,
            step_fn: Callable[[np.ndarray], np.ndarray] | None = None,
            retract: Callable[[np.ndarray], np.ndarray] | None = None,
            weights: np.ndarray | None = None) -> GNState:
    """Shared iteration: compute a step, backtrack on ``g``, stop on small relative improvement.

    ``step_fn`` maps current frames to a step (defaults to the full GN step);
    ``retract`` maps trial frames back into a constraint set.
    """
    if step_fn is None:
        def step_fn(F):
            return gn_step(build_gn_system(g, t, F, weights), F)
    state = GNState(np.array(frames, dtype=float, copy=True))
    gcur = weighted_g(g, t, state.frames, weights)
    state.g_history.append(gcur)
    for _ in range(max_iters):
        if gcur == 0.0:
            state.stopped = "exact"
            break
        E = step_fn(state.frames)
        state.steps = E
        beta = 1.0
        while True:
            trial = state.frames + beta * E
            if retract is not None:
                trial = retract(trial)
            gt = weighted_g(g, t, trial, weights)
            if not damping or gt < gcur:
                break
            beta /= 2.0
            if beta < 1.0 / 16.0:
                trial = None
                break
        if trial is None:
            state.stopped = "no-descent"
            break
        improvement = (gcur - gt) / gcur
        state.frames = trial
        state.iteration += 1
        state.betas.append(beta)
        state.g_history.append(gt)
        gcur = gt
        if improvement < rel_tol:
            state.stopped = "rel_tol"
            break
    else:
        state.stopped = "max_iters"
    return state


def run_gn(g: FrameGraph, t: EdgeTransforms, init: FrameSolution | None = None,
           max_iters: int = 5, rel_tol: float = 1e-8,
           damping: bool = True) -> tuple[FrameSolution, GNState]:
    """Gauss-Newton iterations started from the H-method (or ``init``)."""
    if init is None:
        init = solve_h(g, t)
    state = gn_loop(g, t, init.frames, max_iters, rel_tol, damping)
    return FrameSolution(state.frames, "gn"), state
