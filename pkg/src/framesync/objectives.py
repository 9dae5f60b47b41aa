"""Residual objectives shared by every solver.

``g`` measures the observed transforms against the pairwise set induced by
per-frame matrices, ``G_i^{-1} G_j``. ``f`` is the quadratic relaxation in
the inverse frames ``X_i = G_i^{-1}``. ``g_prime`` is the per-edge mean of
``2 g`` used in reports.
"""
from __future__ import annotations

import numpy as np

from .graph import FrameGraph
from .matrices import EdgeTransforms


def edge_arrays(g: FrameGraph, t: EdgeTransforms) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sorted edge endpoints and the matching stack of transforms."""
    edges = g.sorted_edges()
    if not edges:
        return np.zeros(0, int), np.zeros(0, int), np.zeros((0, 0, 0))
    src = np.array([e[0] for e in edges])
    dst = np.array([e[1] for e in edges])
    Gs = np.stack([np.asarray(t[e], dtype=float) for e in edges])
    return src, dst, Gs


def edge_residuals(g: FrameGraph, t: EdgeTransforms, frames: np.ndarray) -> np.ndarray:
    """Stack of ``G_ij - G_i^{-1} G_j`` in sorted edge order."""
    src, dst, Gs = edge_arrays(g, t)
    if src.size == 0:
        return np.zeros((0,) + frames.shape[1:])
    inv = np.linalg.inv(frames)
    return Gs - inv[src] @ frames[dst]


def g_value(g: FrameGraph, t: EdgeTransforms, frames: np.ndarray) -> float:
    R = edge_residuals(g, t, frames)
    return 0.5 * float(np.sum(R * R))


def g_prime(g: FrameGraph, t: EdgeTransforms, frames: np.ndarray) -> float:
    """Mean squared Frobenius residual per edge (no one-half factor)."""
    if not g.edges:
        return 0.0
    R = edge_residuals(g, t, frames)
    return float(np.sum(R * R)) / len(g.edges)


def f_value(g: FrameGraph, t: EdgeTransforms, inv_frames: np.ndarray) -> float:
    """Quadratic relaxation evaluated at inverse frames ``X_i``: sum of ``1/2 ||G_ij X_j - X_i||^2``."""
    src, dst, Gs = edge_arrays(g, t)
    if src.size == 0:
        return 0.0
    R = Gs @ inv_frames[dst] - inv_frames[src]
    return 0.5 * float(np.sum(R * R))
