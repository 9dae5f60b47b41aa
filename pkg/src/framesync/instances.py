"""Synthetic problem instances: random frames, noise models and instance JSON."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import expm

from .graph import FrameGraph, densify, generate_min_qsc

TRANSFORM_CLASSES = ("orthogonal", "linear", "affine", "euclidean")
NOISE_MODELS = ("gauss-proj", "gauss-raw", "geodesic")
DEFAULT_NOISE = {
    "orthogonal": "gauss-proj",
    "linear": "gauss-raw",
    "affine": "gauss-raw",
    "euclidean": "gauss-proj",
}


@dataclass(frozen=True)
class InstanceSpec:
    n: int = 30
    d: int = 3
    sigma: float = 0.3
    rho: float = 0.5
    transform_class: str = "orthogonal"
    noise_model: str | None = None
    seed: int = 0
    radius: float = np.pi / 4
    translation_range: float = 5.0
    # when set, the graph is the complete graph minus this many random non-tree edges
    missing_edges: int | None = None

    def __post_init__(self):
        if self.n < 2 or self.d < 2:
            raise ValueError("need n >= 2 and d >= 2")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.transform_class not in TRANSFORM_CLASSES:
            raise ValueError(f"unknown transform class {self.transform_class!r}")
        if self.noise_model is not None and self.noise_model not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.noise_model!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def noise(self) -> str:
        return self.noise_model or DEFAULT_NOISE[self.transform_class]

    @property
    def homogeneous(self) -> bool:
        return self.transform_class in ("affine", "euclidean")


@dataclass
class ProblemInstance:
    spec: InstanceSpec
    graph: FrameGraph
    qsc_edges: frozenset
    truth: np.ndarray
    consistent: dict
    observed: dict = field(repr=False)

    @property
    def d(self) -> int:
        """Matrix size of the transforms (``d + 1`` for homogeneous classes)."""
        return self.truth.shape[1]


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of O(d): the orthogonal polar factor of a Gaussian matrix."""
    U, _, Vt = np.linalg.svd(rng.standard_normal((d, d)))
    return U @ Vt


def skew_from_vector(v: np.ndarray, d: int) -> np.ndarray:
    S = np.zeros((d, d))
    iu = np.triu_indices(d, k=1)
    S[iu] = v
    return S - S.T


def geodesic_noise(d: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``exp(S)`` for skew ``S`` drawn uniformly from a ball of the given radius.

    The ball is measured in the Euclidean norm of the ``d(d-1)/2`` entries
    above the diagonal; for d = 3 this norm is the rotation angle.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    m = d * (d - 1) // 2
    direction = rng.standard_normal(m)
    direction /= np.linalg.norm(direction)
    r = radius * rng.uniform() ** (1.0 / m)
    return expm(skew_from_vector(r * direction, d))


def _project(M: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def _noisy_linear(Gs: np.ndarray, spec: InstanceSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.noise == "geodesic":
        return np.stack([G @ geodesic_noise(G.shape[0], spec.radius, rng) for G in Gs])
    if spec.sigma == 0:
        # no draw and no re-projection, so the observation is bit-for-bit consistent
        return Gs.copy()
    noisy = Gs + spec.sigma * rng.standard_normal(Gs.shape)
    if spec.noise == "gauss-proj":
        noisy = _project(noisy)
    return noisy


def _graph(spec: InstanceSpec, rng: np.random.Generator) -> tuple[FrameGraph, frozenset]:
    tree, density = generate_min_qsc(spec.n, rng)
    if spec.missing_edges is None:
        return densify(tree, density.qsc_edges, spec.rho, rng), density.qsc_edges
    optional = [(i, j) for i in range(spec.n) for j in range(spec.n)
                if i != j and (i, j) not in tree.edges]
    if spec.missing_edges > len(optional):
        raise ValueError("more missing edges requested than optional edges exist")
    drop = rng.choice(len(optional), size=spec.missing_edges, replace=False)
    keep = np.ones(len(optional), bool)
    keep[drop] = False
    edges = tree.edges | {e for e, k in zip(optional, keep) if k}
    return FrameGraph(spec.n, frozenset(edges)), density.qsc_edges


def make_instance(spec: InstanceSpec) -> ProblemInstance:
    """Random ground truth, its consistent pairwise set and a noisy observation of it.

    The graph is drawn first, then the frames, then the noise, all from one
    generator seeded by ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    graph, qsc = _graph(spec, rng)
    d, n = spec.d, spec.n
    rot = np.stack([random_orthogonal(d, rng) for _ in range(n)])
    if spec.homogeneous:
        truth = np.zeros((n, d + 1, d + 1))
        truth[:, :d, :d] = rot
        truth[:, :d, d] = rng.uniform(-spec.translation_range, spec.translation_range, (n, d))
        truth[:, d, d] = 1.0
    else:
        truth = rot
    edges = graph.sorted_edges()
    src = np.array([e[0] for e in edges])
    dst = np.array([e[1] for e in edges])
    consistent_stack = np.linalg.inv(truth)[src] @ truth[dst]
    if spec.homogeneous:
        noisy = consistent_stack.copy()
        noisy[:, :d, :d] = _noisy_linear(consistent_stack[:, :d, :d], spec, rng)
        if spec.sigma > 0:
            noisy[:, :d, d] += spec.sigma * rng.standard_normal((len(edges), d))
    else:
        noisy = _noisy_linear(consistent_stack, spec, rng)
    consistent = {e: G for e, G in zip(edges, consistent_stack)}
    observed = {e: G for e, G in zip(edges, noisy)}
    return ProblemInstance(spec, graph, qsc, truth, consistent, observed)


def _spec_dict(spec: InstanceSpec) -> dict:
    out = asdict(spec)
    out["radius"] = float(spec.radius)
    return out


def instance_to_dict(inst: ProblemInstance, include_truth: bool = True) -> dict:
    """Instance JSON: 1-based ``"i,j"`` keys and row-major matrices."""
    out = {
        "spec": _spec_dict(inst.spec),
        "graph": inst.graph.to_dict(inst.qsc_edges),
        "transforms": {f"{i + 1},{j + 1}": G.ravel().tolist()
                       for (i, j), G in sorted(inst.observed.items())},
    }
    if include_truth:
        out["ground_truth"] = [G.ravel().tolist() for G in inst.truth]
    return out


def transforms_from_dict(data: dict) -> dict:
    out = {}
    for key, flat in data.items():
        i, j = (int(x) for x in key.split(","))
        arr = np.asarray(flat, dtype=float)
        m = int(round(np.sqrt(arr.size)))
        out[i - 1, j - 1] = arr.reshape(m, m)
    return out


def instance_from_dict(data: dict) -> ProblemInstance:
    spec = InstanceSpec(**data["spec"])
    graph = FrameGraph.from_dict(data["graph"])
    qsc = frozenset((i - 1, j - 1) for i, j in data["graph"].get("qsc_edges", []))
    observed = transforms_from_dict(data["transforms"])
    m = next(iter(observed.values())).shape[0] if observed else spec.d
    truth = (np.asarray(data["ground_truth"], dtype=float).reshape(-1, m, m)
             if data.get("ground_truth") is not None else np.full((graph.n, m, m), np.nan))
    consistent = ({e: np.linalg.solve(truth[e[0]], truth[e[1]]) for e in graph.sorted_edges()}
                  if data.get("ground_truth") is not None else {})
    return ProblemInstance(spec, graph, qsc, truth, consistent, observed)


def save_instance(inst: ProblemInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)


def load_instance(path) -> ProblemInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
