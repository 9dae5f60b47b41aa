"""Directed frame graphs: construction, connectivity queries and random generation.

Nodes are 0-based internally. The JSON representation (``to_dict`` /
``from_dict``) is 1-based, matching how frames are numbered in reports.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import NonQSCGraph

Edge = tuple[int, int]


@dataclass(frozen=True)
class FrameGraph:
    """Directed graph over ``n`` frames.

    An edge ``(i, j)`` means the transform ``G_ij`` from frame i to frame j
    is available. Self-loops are never stored.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be non-negative")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge {(i, j)} has an endpoint outside 0..{self.n - 1}")
            if i == j:
                raise ValueError(f"self-loop {(i, j)} is not allowed")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def complete(cls, n: int) -> "FrameGraph":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(n) if i != j))

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def out_neighbors(self, i: int) -> list[int]:
        return sorted(j for a, j in self.edges if a == i)

    def in_neighbors(self, j: int) -> list[int]:
        return sorted(i for i, b in self.edges if b == j)

    def out_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, _ in self.edges:
            deg[i] += 1
        return deg

    def is_symmetric(self) -> bool:
        return all((j, i) in self.edges for i, j in self.edges)

    def is_complete(self) -> bool:
        return len(self.edges) == self.n * (self.n - 1)

    def union(self, other: "FrameGraph") -> "FrameGraph":
        return FrameGraph(self.n, self.edges | other.edges)

    def to_dict(self, qsc_edges: Iterable[Edge] | None = None) -> dict:
        out = {"n": self.n, "edges": [[i + 1, j + 1] for i, j in self.sorted_edges()]}
        if qsc_edges is not None:
            out["qsc_edges"] = [[i + 1, j + 1] for i, j in sorted(qsc_edges)]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FrameGraph":
        return cls(int(data["n"]), frozenset((i - 1, j - 1) for i, j in data["edges"]))


@dataclass(frozen=True)
class GraphDensity:
    rho: float
    qsc_edges: frozenset


def adjacency(g: FrameGraph) -> np.ndarray:
    A = np.zeros((g.n, g.n))
    for i, j in g.edges:
        A[i, j] = 1.0
    return A


def laplacian(g: FrameGraph) -> np.ndarray:
    A = adjacency(g)
    return np.diag(A.sum(axis=1)) - A


def reverse(g: FrameGraph) -> FrameGraph:
    return FrameGraph(g.n, frozenset((j, i) for i, j in g.edges))


def is_connected(g: FrameGraph) -> bool:
    """True if the undirected version of ``g`` has a single component."""
    if g.n <= 1:
        return True
    nbrs: list[set[int]] = [set() for _ in range(g.n)]
    for i, j in g.edges:
        nbrs[i].add(j)
        nbrs[j].add(i)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == g.n


def _reaches(g: FrameGraph, target: int) -> set[int]:
    # nodes with a directed path to ``target`` (BFS on reversed edges)
    preds: list[list[int]] = [[] for _ in range(g.n)]
    for i, j in g.edges:
        preds[j].append(i)
    seen = {target}
    queue = deque([target])
    while queue:
        u = queue.popleft()
        for v in preds[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def find_centers(g: FrameGraph) -> list[int]:
    """Nodes that every other node reaches along a directed path."""
    return [c for c in range(g.n) if len(_reaches(g, c)) == g.n]


def is_qsc(g: FrameGraph) -> bool:
    return g.n >= 1 and len(find_centers(g)) > 0


def graph_density(g: FrameGraph, qsc_edges: Iterable[Edge]) -> float:
    """Fraction of optional edges present beyond the embedded spanning tree.

    Uses ``n**2 - |tree|`` as the denominator. The complete graph is reported
    as exactly 1 since self-loops are not stored.
    """
    qsc = frozenset(qsc_edges)
    if g.is_complete():
        return 1.0
    extra = sum(1 for e in g.edges if e not in qsc)
    return extra / (g.n**2 - len(qsc))


def generate_min_qsc(n: int, rng: np.random.Generator) -> tuple[FrameGraph, GraphDensity]:
    """Random spanning tree whose edges all point toward a random root.

    Each step attaches a random unvisited node ``i`` to a random visited node
    ``j`` through edge ``(i, j)``, so the root is a center.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    root = int(rng.integers(n))
    visited = [root]
    remaining = [v for v in range(n) if v != root]
    edges = set()
    for _ in range(n - 1):
        i = remaining.pop(int(rng.integers(len(remaining))))
        j = visited[int(rng.integers(len(visited)))]
        edges.add((i, j))
        visited.append(i)
    tree = frozenset(edges)
    return FrameGraph(n, tree), GraphDensity(0.0, tree)


def densify(g: FrameGraph, qsc_edges: Iterable[Edge], target_rho: float,
            rng: np.random.Generator) -> FrameGraph:
    """Add uniformly random absent edges until the density reaches ``target_rho``."""
    if not 0.0 <= target_rho <= 1.0:
        raise ValueError("target_rho must lie in [0, 1]")
    qsc = frozenset(qsc_edges)
    if not qsc <= g.edges:
        raise ValueError("graph must contain the spanning-tree edges")
    edges = set(g.edges)
    absent = [(i, j) for i in range(g.n) for j in range(g.n)
              if i != j and (i, j) not in edges]
    order = rng.permutation(len(absent))
    full = g.n * (g.n - 1)
    denom = g.n**2 - len(qsc)
    extra = len(edges - qsc)
    k = 0
    while k < len(order) and len(edges) < full and extra / denom < target_rho:
        edges.add(absent[order[k]])
        extra += 1
        k += 1
    return FrameGraph(g.n, frozenset(edges))


def random_min_qsc_subgraph(g: FrameGraph, rng: np.random.Generator) -> FrameGraph:
    """Spanning tree of ``g`` grown backwards from a random center.

    The chosen center is the tree's only node without out-edges. Repeatedly
    picks a random tree node ``r`` and a random in-neighbour ``r'`` of it that
    is not yet in the tree, adding ``(r', r)``.
    """
    centers = find_centers(g)
    if not centers:
        raise NonQSCGraph("graph has no center")
    c = centers[int(rng.integers(len(centers)))]
    preds: list[list[int]] = [[] for _ in range(g.n)]
    for i, j in sorted(g.edges):
        preds[j].append(i)
    in_tree = [c]
    members = {c}
    edges = set()
    while len(edges) < g.n - 1:
        r = in_tree[int(rng.integers(len(in_tree)))]
        candidates = [v for v in preds[r] if v not in members]
        if not candidates:
            continue
        rp = candidates[int(rng.integers(len(candidates)))]
        edges.add((rp, r))
        in_tree.append(rp)
        members.add(rp)
    return FrameGraph(g.n, frozenset(edges))
