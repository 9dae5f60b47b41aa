"""Affine and Euclidean synchronization in homogeneous coordinates.

A transform of spatial dimension d is stored as the D x D matrix
``[[Q, t], [0, 1]]`` with ``D = d + 1``. The solver splits the problem: the
linear parts are synchronized first, translations then follow from a linear
least-squares problem, and a Gauss-Newton pass whose steps keep a zero last
row refines both together.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .direct import FrameSolution, polar, solve_h, solve_orthogonal
from .errors import FrameSyncError
from .gauss_newton import build_gn_system, gn_loop, min_norm_solve, unvec, GNState
from .graph import FrameGraph
from .matrices import EdgeTransforms


@dataclass
class AffineTransform:
    Q: np.ndarray
    t: np.ndarray

    @property
    def d(self) -> int:
        return self.Q.shape[0]

    def homogeneous(self) -> np.ndarray:
        return compose(self)

    def inverse(self) -> "AffineTransform":
        Qi = np.linalg.inv(self.Q)
        return AffineTransform(Qi, -Qi @ self.t)


def split(G: np.ndarray) -> AffineTransform:
    G = np.asarray(G, dtype=float)
    D = G.shape[0]
    last = np.zeros(D)
    last[-1] = 1.0
    if G.shape != (D, D) or not np.array_equal(G[-1], last):
        raise ValueError("not a homogeneous affine matrix: last row must be (0, ..., 0, 1)")
    return AffineTransform(G[:-1, :-1].copy(), G[:-1, -1].copy())


def compose(a: AffineTransform) -> np.ndarray:
    d = a.Q.shape[0]
    G = np.zeros((d + 1, d + 1))
    G[:d, :d] = a.Q
    G[:d, d] = a.t
    G[d, d] = 1.0
    return G


def homogeneous_frames(Q: np.ndarray, t: np.ndarray) -> np.ndarray:
    n, d = Q.shape[0], Q.shape[1]
    G = np.zeros((n, d + 1, d + 1))
    G[:, :d, :d] = Q
    G[:, :d, d] = t
    G[:, d, d] = 1.0
    return G


def linear_parts(t_obs: EdgeTransforms) -> dict:
    return {e: np.asarray(G)[:-1, :-1] for e, G in t_obs.items()}


def translation_parts(t_obs: EdgeTransforms) -> dict:
    return {e: np.asarray(G)[:-1, -1] for e, G in t_obs.items()}


def translation_system(g: FrameGraph, Q: np.ndarray,
                       t_obs: dict) -> tuple[np.ndarray, np.ndarray]:
    """``H_Aff`` (nd x nd) and ``c_Aff`` of the translation least-squares problem."""
    n, d = Q.shape[0], Q.shape[1]
    Qinv = np.linalg.inv(Q)
    M = np.swapaxes(Qinv, 1, 2) @ Qinv  # Q_i^{-T} Q_i^{-1}
    H = np.zeros((n, n, d, d))
    c = np.zeros((n, d))
    for i, j in g.sorted_edges():
        H[i, i] += M[i]
        H[j, j] += M[i]
        H[i, j] -= M[i]
        H[j, i] -= M[i]
        v = Qinv[i].T @ np.asarray(t_obs[i, j], dtype=float)
        c[i] += v
        c[j] -= v
    return H.transpose(0, 2, 1, 3).reshape(n * d, n * d), c.ravel()


def translation_objective(g: FrameGraph, Q: np.ndarray, t_obs: dict, t: np.ndarray) -> float:
    total = 0.0
    for i, j in g.edges:
        r = np.asarray(t_obs[i, j]) - np.linalg.solve(Q[i], t[j] - t[i])
        total += 0.5 * float(r @ r)
    return total


def solve_translations(g: FrameGraph, Q: np.ndarray, t_obs: dict) -> np.ndarray:
    """Minimum-norm frame translations ``(n, d)`` for fixed linear parts."""
    H, c = translation_system(g, Q, t_obs)
    n, d = Q.shape[0], Q.shape[1]
    drift = np.linalg.norm(c.reshape(n, d).sum(axis=0))
    if drift > 1e-8 * max(np.linalg.norm(c), 1.0):
        raise FrameSyncError("translation system is inconsistent with its gauge")
    return min_norm_solve(H, -c).reshape(n, d)


def build_affine_mask_selector(n: int, D: int) -> np.ndarray:
    """``I_n kron (I_D kron [I_{D-1}; 0])``: reduced variables to steps with a zero last row."""
    Bbar = np.vstack([np.eye(D - 1), np.zeros((1, D - 1))])
    return np.kron(np.eye(n), np.kron(np.eye(D), Bbar))


def residual_weights(D: int, weight: float) -> np.ndarray | None:
    """Entry mask weighting the linear-part residual by ``weight``; None when it is 1."""
    if weight == 1.0:
        return None
    if weight <= 0:
        raise ValueError("weight must be positive")
    W = np.ones((D, D))
    W[:-1, :-1] = weight
    return W


def _masked_step(g, t_obs, X, weights):
    def step(F):
        sys = build_gn_system(g, t_obs, F, weights, sparse=False)
        v = min_norm_solve(X.T @ sys.H @ X, -(X.T @ sys.c))
        return unvec(X @ v, F.shape[1])
    return step


def _reproject(F: np.ndarray) -> np.ndarray:
    out = F.copy()
    out[:, :-1, :-1] = polar(F[:, :-1, :-1])
    return out


def _affine_pipeline(g, t_obs, Q, refine, max_iters, rel_tol, damping, weight, euclidean, method):
    tvec = solve_translations(g, Q, translation_parts(t_obs))
    frames = homogeneous_frames(Q, tvec)
    if not refine:
        return FrameSolution(frames, method), None
    D = frames.shape[1]
    weights = residual_weights(D, weight)
    X = build_affine_mask_selector(g.n, D)
    state = gn_loop(g, t_obs, frames, max_iters, rel_tol, damping,
                    step_fn=_masked_step(g, t_obs, X, weights),
                    retract=_reproject if euclidean else None, weights=weights)
    return FrameSolution(state.frames, method), state


def run_affine(g: FrameGraph, t_obs: EdgeTransforms, refine: bool = True, max_iters: int = 5,
               rel_tol: float = 1e-8, damping: bool = True,
               weight: float = 1.0) -> tuple[FrameSolution, GNState | None]:
    """Linear parts by the H-method, translations by least squares, then masked Gauss-Newton."""
    Q = solve_h(g, linear_parts(t_obs)).frames
    return _affine_pipeline(g, t_obs, Q, refine, max_iters, rel_tol, damping, weight, False, "affine")


def run_euclidean(g: FrameGraph, t_obs: EdgeTransforms, refine: bool = True, max_iters: int = 5,
                  rel_tol: float = 1e-8, damping: bool = True, weight: float = 1.0,
                  reproject: bool = True) -> tuple[FrameSolution, GNState | None]:
    """As ``run_affine`` with orthogonal linear parts; GN iterates are re-projected when ``reproject``."""
    _, proj = solve_orthogonal(g, linear_parts(t_obs), "h")
    sol, state = _affine_pipeline(g, t_obs, proj.frames, refine, max_iters, rel_tol, damping,
                                  weight, reproject, "euclidean")
    return sol, state


def project_affine(frames: np.ndarray, euclidean: bool = False) -> np.ndarray:
    """Naively map arbitrary homogeneous frames onto affine (or Euclidean) ones.

    A common left factor fixes the gauge so that the last rows best match
    ``(0, ..., 0, 1)`` in least squares; the last rows are then overwritten and,
    for the Euclidean case, the top rows rescaled by ``S^{-1/2}`` with ``S`` the
    mean of ``L_i L_i^T`` over the linear parts ``L_i`` before projecting them
    onto O(d).
    """
    n, D = frames.shape[0], frames.shape[1]
    e = np.zeros(D)
    e[-1] = 1.0
    A = np.concatenate([F.T for F in frames])
    u = np.linalg.lstsq(A, np.tile(e, n), rcond=None)[0]
    M = np.eye(D)
    M[-1] = u
    out = M @ frames
    out[:, -1, :] = e
    if euclidean:
        L = out[:, :-1, :-1]
        w, V = np.linalg.eigh(np.mean(L @ np.swapaxes(L, 1, 2), axis=0))
        out[:, :-1, :] = (V / np.sqrt(w)) @ V.T @ out[:, :-1, :]
        out[:, :-1, :-1] = polar(out[:, :-1, :-1])
    return out
