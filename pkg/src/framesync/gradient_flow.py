"""Gradient flow of ``g`` on the product of orthogonal groups.

For orthogonal frames ``g = const - sum_E tr(G_ij^T G_i^T G_j)``, so its
Euclidean gradient in ``G_i`` is ``-B_i`` with

    B_i = sum_{j in N_i} G_j G_ij^T + sum_{k : i in N_k} G_k G_ki.

Projecting onto the tangent space at ``G_i`` gives the flow

    dG_i/dt = G_i (G_i^T B_i - B_i^T G_i) / 2,

integrated with fixed-step RK4 from the projected H-method solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .direct import FrameSolution, SyncReport, metrics, polar, solve_orthogonal
from .graph import FrameGraph
from .matrices import EdgeTransforms
from .objectives import edge_arrays, g_value

DRIFT_TOL = 1e-6
MIN_STEP = 1e-6


@dataclass
class FlowState:
    frames: np.ndarray
    time: float = 0.0
    energy: list = field(default_factory=list)
    steps: int = 0
    rejected: int = 0
    reorthonormalized: int = 0
    step_size: float = 0.0
    stopped: str = ""


def _pull(g: FrameGraph, t: EdgeTransforms, frames: np.ndarray) -> np.ndarray:
    src, dst, Gs = edge_arrays(g, t)
    B = np.zeros_like(frames)
    if src.size:
        np.add.at(B, src, frames[dst] @ np.swapaxes(Gs, 1, 2))
        np.add.at(B, dst, frames[src] @ Gs)
    return B


def flow_rhs(g: FrameGraph, t: EdgeTransforms, frames: np.ndarray) -> np.ndarray:
    """Negative Riemannian gradient of ``g`` at orthogonal ``frames``; shape ``(n, d, d)``."""
    B = _pull(g, t, frames)
    GtB = np.swapaxes(frames, 1, 2) @ B
    return frames @ (0.5 * (GtB - np.swapaxes(GtB, 1, 2)))


def energy_rate(g: FrameGraph, t: EdgeTransforms, frames: np.ndarray) -> float:
    """``dg/dt`` along the flow: the inner product of the Euclidean gradient with the velocity."""
    return float(np.sum(-_pull(g, t, frames) * flow_rhs(g, t, frames)))


def orthogonality_drift(frames: np.ndarray) -> float:
    d = frames.shape[1]
    return float(np.linalg.norm(np.swapaxes(frames, 1, 2) @ frames - np.eye(d), axis=(1, 2)).max())


def _rk4(g, t, F, h):
    k1 = flow_rhs(g, t, F)
    k2 = flow_rhs(g, t, F + 0.5 * h * k1)
    k3 = flow_rhs(g, t, F + 0.5 * h * k2)
    k4 = flow_rhs(g, t, F + h * k3)
    return F + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_flow(g: FrameGraph, t: EdgeTransforms, init: np.ndarray, T: float = 10.0,
                   h: float = 0.01) -> FlowState:
    """RK4 on ``[0, T]``; steps that raise ``g`` are rejected and retried with half the step."""
    if T < 0 or h <= 0:
        raise ValueError("need T >= 0 and h > 0")
    F = np.array(init, dtype=float, copy=True)
    if orthogonality_drift(F) > DRIFT_TOL:
        raise ValueError("initial frames must be orthogonal")
    state = FlowState(F, 0.0, [g_value(g, t, F)], step_size=h)
    energy = state.energy[0]
    while state.time < T - 1e-12:
        step = min(h, T - state.time)
        trial = _rk4(g, t, state.frames, step)
        if orthogonality_drift(trial) > DRIFT_TOL:
            trial = polar(trial)
            state.reorthonormalized += 1
        e = g_value(g, t, trial)
        if e > energy:
            if e - energy <= 1e-12 * max(energy, 1.0):
                # increase at round-off level: the flow has settled
                state.stopped = "stationary"
                break
            state.rejected += 1
            h *= 0.5
            if h < MIN_STEP:
                state.stopped = "min_step"
                break
            continue
        state.frames, energy = trial, e
        state.time += step
        state.steps += 1
        state.energy.append(e)
    state.step_size = h
    state.stopped = state.stopped or "horizon"
    state.frames = polar(state.frames)
    state.energy.append(g_value(g, t, state.frames))
    return state


def run_flow(g: FrameGraph, t: EdgeTransforms, T: float = 10.0, h: float = 0.01,
             method: str = "h") -> tuple[FrameSolution, SyncReport, FlowState]:
    """Projected spectral solution refined by the gradient flow."""
    _, start = solve_orthogonal(g, t, method)
    state = integrate_flow(g, t, start.frames, T, h)
    sol = FrameSolution(state.frames, "gradflow")
    return sol, metrics(g, t, sol), state
