"""Synchronous-round simulator for the two distributed protocols.

Every node i holds a d x d state ``X_i`` and, in each round, reads its
neighbours' previous-round states:

* Z protocol, over the directed graph itself::

      X_i <- X_i + eps * sum_{j in N_i} (G_ij X_j - X_i)

* H protocol, over the graph united with its reverse::

      X_i <- X_i + eps * sum_{j in N_i^com} (Q_ij X_j - V_ij X_i)

  with ``Q_ij = G_ij + G_ji^T`` and ``V_ij = [ (i,j) in E ] I + G_ji^T G_ji``,
  absent transforms counting as zero.

Stacked over nodes these are ``X <- (I - eps M) X`` for ``M = Z`` or ``M = H``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .direct import COND_LIMIT, FrameSolution, polar
from .errors import DisconnectedGraph, NonQSCGraph, SingularBlock
from .graph import FrameGraph, is_connected, is_qsc, reverse
from .matrices import EdgeTransforms, build_H, build_Z, spectral_radius, transform_dim
from .objectives import g_prime

TRACE_HEADER = ("round", "g_prime", "max_state_norm", "variant", "seed")


@dataclass
class ProtocolConfig:
    variant: str = "z"
    epsilon: float | str = 0.01
    rounds: int = 5000
    seed: int = 0
    trace_every: int = 100
    orthogonal: bool = True

    def __post_init__(self):
        self.variant = self.variant.lower()
        if self.variant not in ("z", "h"):
            raise ValueError("variant must be 'z' or 'h'")
        if self.epsilon != "auto" and not float(self.epsilon) > 0:
            raise ValueError("epsilon must be positive or 'auto'")
        if self.rounds < 0 or self.trace_every < 1:
            raise ValueError("rounds must be >= 0 and trace_every >= 1")


@dataclass
class Simulator:
    graph: FrameGraph
    comm: FrameGraph
    cfg: ProtocolConfig
    epsilon: float
    src: np.ndarray
    dst: np.ndarray
    Q: np.ndarray
    V: np.ndarray
    X: np.ndarray
    round: int = 0
    messages: int = 0
    transforms: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def stacked(self) -> np.ndarray:
        return self.X.reshape(-1, self.d)


@dataclass
class TraceRow:
    round: int
    g_prime: float
    max_state_norm: float
    variant: str
    seed: int


def node_initial_state(seed: int, node: int, d: int, attempt: int = 0) -> np.ndarray:
    """Uniform(-0.5, 0.5) entries from a stream keyed by (seed, node, attempt)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, node, attempt]))
    return rng.uniform(-0.5, 0.5, (d, d))


def _initial_states(n: int, d: int, seed: int) -> np.ndarray:
    for attempt in range(100):
        X = np.stack([node_initial_state(seed, i, d, attempt) for i in range(n)])
        if np.linalg.matrix_rank(X.reshape(-1, d)) == d:
            return X
    raise SingularBlock("could not draw a full-rank initial state")


def protocol_matrix(g: FrameGraph, t: EdgeTransforms, variant: str, d: int | None = None) -> np.ndarray:
    return build_Z(g, t, d, sparse=False) if variant == "z" else build_H(g, t, d, sparse=False)


def init_network(g: FrameGraph, t: EdgeTransforms, cfg: ProtocolConfig) -> Simulator:
    d = transform_dim(t)
    if cfg.variant == "z":
        if not is_qsc(g):
            raise NonQSCGraph("the Z protocol needs a graph with a center")
        comm = g
    else:
        if not is_connected(g):
            raise DisconnectedGraph("the H protocol needs a connected graph")
        comm = g.union(reverse(g))
    edges = comm.sorted_edges()
    src = np.array([e[0] for e in edges], dtype=int)
    dst = np.array([e[1] for e in edges], dtype=int)
    m = len(edges)
    zero = np.zeros((d, d))
    eye = np.eye(d)
    Q = np.empty((m, d, d))
    V = np.empty((m, d, d))
    for k, (i, j) in enumerate(edges):
        Gij = np.asarray(t[i, j], dtype=float) if (i, j) in g.edges else zero
        if cfg.variant == "z":
            Q[k], V[k] = Gij, eye
        else:
            Gji = np.asarray(t[j, i], dtype=float) if (j, i) in g.edges else zero
            Q[k] = Gij + Gji.T
            V[k] = ((i, j) in g.edges) * eye + Gji.T @ Gji
    if cfg.epsilon == "auto":
        eps = 0.9 / spectral_radius(protocol_matrix(g, t, cfg.variant, d))
    else:
        eps = float(cfg.epsilon)
    X = _initial_states(g.n, d, cfg.seed)
    return Simulator(g, comm, cfg, eps, src, dst, Q, V, X, transforms=dict(t))


def _round(sim: Simulator) -> Simulator:
    # every message uses the snapshot from the previous round
    X = sim.X
    msg = sim.Q @ X[sim.dst] - sim.V @ X[sim.src]
    delta = np.zeros_like(X)
    np.add.at(delta, sim.src, msg)
    sim.X = X + sim.epsilon * delta
    sim.round += 1
    sim.messages += len(sim.src)
    return sim


def round_z(sim: Simulator) -> Simulator:
    if sim.cfg.variant != "z":
        raise ValueError("simulator was initialised for the H protocol")
    return _round(sim)


def round_h(sim: Simulator) -> Simulator:
    if sim.cfg.variant != "h":
        raise ValueError("simulator was initialised for the Z protocol")
    return _round(sim)


def step(sim: Simulator, rounds: int = 1) -> Simulator:
    for _ in range(rounds):
        _round(sim)
    return sim


def finalize(sim: Simulator) -> FrameSolution:
    """Read frames off the current states.

    Z protocol: ``G_i = polar(X_i)^T``. H protocol: ``G_i = X_i^{-1}``, then
    projected onto O(d) when the configuration is orthogonal.
    """
    if sim.cfg.variant == "z":
        return FrameSolution(np.swapaxes(polar(sim.X), 1, 2), "dist-z")
    s = np.linalg.svd(sim.X, compute_uv=False)
    if np.any(~(s[:, 0] <= COND_LIMIT * s[:, -1])):
        raise SingularBlock("a node state is numerically singular")
    frames = np.linalg.inv(sim.X)
    if sim.cfg.orthogonal:
        frames = polar(frames)
    return FrameSolution(frames, "dist-h")


def _trace_row(sim: Simulator) -> TraceRow:
    try:
        gp = g_prime(sim.graph, sim.transforms, finalize(sim).frames)
    except SingularBlock:
        gp = float("nan")
    norm = float(np.linalg.norm(sim.X, axis=(1, 2)).max())
    return TraceRow(sim.round, gp, norm, sim.cfg.variant, sim.cfg.seed)


def run_protocol(sim: Simulator, rounds: int | None = None) -> list[TraceRow]:
    """Advance ``rounds`` rounds, recording a trace row every ``trace_every`` rounds and at the end."""
    rounds = sim.cfg.rounds if rounds is None else rounds
    every = sim.cfg.trace_every
    trace = [_trace_row(sim)]
    for r in range(1, rounds + 1):
        _round(sim)
        if r % every == 0 or r == rounds:
            trace.append(_trace_row(sim))
    return trace


def matrix_power_reference(M: np.ndarray, X0: np.ndarray, eps: float, rounds: int) -> np.ndarray:
    """``(I - eps M)^rounds`` applied to the stacked state, for cross-checking the simulator."""
    n, d = X0.shape[0], X0.shape[1]
    A = np.eye(M.shape[0]) - eps * M
    return (np.linalg.matrix_power(A, rounds) @ X0.reshape(-1, d)).reshape(n, d, d)


def trace_csv(trace: list[TraceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for row in trace:
        w.writerow([row.round, repr(row.g_prime), repr(row.max_state_norm), row.variant, row.seed])
    return buf.getvalue()


def run_distributed(g: FrameGraph, t: EdgeTransforms, cfg: ProtocolConfig) -> tuple[FrameSolution, list[TraceRow]]:
    sim = init_network(g, t, cfg)
    trace = run_protocol(sim)
    return finalize(sim), trace
