import numpy as np
import pytest

from framesync.graph import FrameGraph, densify, generate_min_qsc


def random_frames(n, d, rng, kind="gaussian"):
    if kind == "orthogonal":
        return np.stack([np.linalg.qr(rng.standard_normal((d, d)))[0] for _ in range(n)])
    return rng.standard_normal((n, d, d))


def consistent_set(g, frames):
    return {(i, j): np.linalg.solve(frames[i], frames[j]) for i, j in g.edges}


def random_qsc_graph(n, rho, rng):
    tree, dens = generate_min_qsc(n, rng)
    return densify(tree, dens.qsc_edges, rho, rng), dens.qsc_edges


def random_connected_graph(n, rho, rng):
    """Spanning tree with randomly flipped edges plus extra random edges; usually not QSC."""
    tree, dens = generate_min_qsc(n, rng)
    flipped = frozenset((j, i) if rng.random() < 0.5 else (i, j) for i, j in tree.edges)
    g = FrameGraph(n, flipped)
    return densify(g, flipped, rho, rng)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
