import numpy as np
import pytest
import scipy.sparse as sp

from conftest import consistent_set, random_connected_graph, random_frames, random_qsc_graph
from framesync.errors import MissingTransform
from framesync.graph import FrameGraph, laplacian
from framesync.matrices import (block, build_H, build_W, build_Z, build_Z2, kernel_dimension,
                                smallest_singular_subspace, spectral_radius, to_json)
from framesync.objectives import f_value


def identity_set(g, d):
    return {e: np.eye(d) for e in g.edges}


def test_w_blocks():
    g = FrameGraph(3, frozenset({(0, 1)}))
    W = build_W(g, {(0, 1): np.eye(2)}, 2)
    expected = np.zeros((6, 6))
    expected[0:2, 2:4] = np.eye(2)
    assert np.array_equal(W, expected)
    assert np.array_equal(build_W(FrameGraph(3), {}, 2), np.zeros((6, 6)))


def test_w_complete_identity():
    g = FrameGraph.complete(3)
    W = build_W(g, identity_set(g, 2))
    assert np.array_equal(W, np.kron(np.ones((3, 3)) - np.eye(3), np.eye(2)))


def test_missing_transform():
    g = FrameGraph(2, frozenset({(0, 1), (1, 0)}))
    with pytest.raises(MissingTransform):
        build_Z(g, {(0, 1): np.eye(2)})


def test_z_with_identity_transforms_is_laplacian(rng):
    g, _ = random_qsc_graph(7, 0.3, rng)
    assert np.array_equal(build_Z(g, identity_set(g, 3)), np.kron(laplacian(g), np.eye(3)))


def test_z2_single_edge_by_hand(rng):
    G = rng.standard_normal((3, 3))
    g = FrameGraph(2, frozenset({(0, 1)}))
    Z2 = build_Z2(g, {(0, 1): G})
    assert np.allclose(block(Z2, 1, 1, 3), G.T @ G)
    assert np.allclose(block(Z2, 1, 0, 3), -G.T)
    assert np.array_equal(block(Z2, 0, 0, 3), np.zeros((3, 3)))
    assert np.array_equal(block(Z2, 0, 1, 3), np.zeros((3, 3)))


def test_z2_equals_reversed_z_for_orthogonal(rng):
    from framesync.graph import reverse
    from framesync.matrices import reversed_transforms
    g, _ = random_qsc_graph(8, 0.4, rng)
    t = {e: np.linalg.qr(rng.standard_normal((3, 3)))[0] for e in g.edges}
    assert np.allclose(build_Z2(g, t), build_Z(reverse(g), reversed_transforms(g, t)), atol=1e-12)
    gs = FrameGraph.complete(5)
    ts = {e: np.linalg.qr(rng.standard_normal((3, 3)))[0] for e in gs.edges}
    Z = build_Z(gs, ts)
    assert np.allclose(build_H(gs, ts), Z + Z.T, atol=1e-12)


def test_h_identity_symmetric_graph_is_twice_laplacian():
    g = FrameGraph.complete(4)
    H = build_H(g, identity_set(g, 2))
    L = laplacian(g)
    assert np.array_equal(H, 2 * np.kron(L, np.eye(2)))
    assert np.allclose(np.sort(np.linalg.eigvalsh(H)), np.sort(np.repeat(2 * np.linalg.eigvalsh(L), 2)))


def test_h_symmetric_psd(rng):
    g, _ = random_qsc_graph(10, 0.5, rng)
    t = {e: rng.standard_normal((3, 3)) for e in g.edges}
    H = build_H(g, t)
    assert np.abs(H - H.T).max() <= 1e-12 * np.abs(H).max()
    assert np.linalg.eigvalsh(H).min() >= -1e-10 * np.linalg.norm(H, 2)


def test_h_is_hessian_of_f(rng):
    g, _ = random_qsc_graph(5, 0.5, rng)
    d = 2
    t = {e: rng.standard_normal((d, d)) for e in g.edges}
    H = build_H(g, t)
    X = rng.standard_normal((5 * d, d))
    # f is quadratic: its Hessian-vector product equals a central difference of gradients
    h = 1e-5
    def grad(Y):
        out = np.zeros_like(Y)
        for idx in np.ndindex(Y.shape):
            Yp, Ym = Y.copy(), Y.copy()
            Yp[idx] += h
            Ym[idx] -= h
            out[idx] = (f_value(g, t, Yp.reshape(5, d, d)) - f_value(g, t, Ym.reshape(5, d, d))) / (2 * h)
        return out
    assert np.linalg.norm(grad(X) - H @ X) / np.linalg.norm(H @ X) <= 1e-5
    # and the quadratic form reproduces f
    assert np.isclose(0.5 * np.trace(X.T @ H @ X), f_value(g, t, X.reshape(5, d, d)), rtol=1e-10)


def test_sparse_and_dense_agree(rng):
    g, _ = random_qsc_graph(9, 0.3, rng)
    t = {e: rng.standard_normal((3, 3)) for e in g.edges}
    for builder in (build_W, build_Z, build_Z2, build_H):
        S = builder(g, t, sparse=True)
        assert sp.issparse(S)
        assert np.allclose(S.toarray(), builder(g, t, sparse=False), atol=1e-14)


def test_kernel_dimension_consistent_connected(rng):
    for _ in range(10):
        n, d = int(rng.integers(3, 12)), int(rng.integers(2, 5))
        g = random_connected_graph(n, 0.2, rng)
        frames = random_frames(n, d, rng)
        assert kernel_dimension(build_H(g, consistent_set(g, frames))) == d
    assert kernel_dimension(np.zeros((6, 6))) == 6


def test_tree_z_annihilates_frames(rng):
    g, _ = random_qsc_graph(12, 0.0, rng)
    t = {e: rng.standard_normal((3, 3)) for e in g.edges}
    V = smallest_singular_subspace(build_Z(g, t), 3)
    assert np.linalg.norm(build_Z(g, t) @ V) <= 1e-10


def test_smallest_subspace_laplacian_kernel():
    g = FrameGraph.complete(5)
    M = np.kron(laplacian(g), np.eye(2))
    V = smallest_singular_subspace(M, 2)
    target = np.kron(np.ones((5, 1)) / np.sqrt(5), np.eye(2))
    # same column space: projector difference vanishes
    assert np.allclose(V @ V.T, target @ target.T, atol=1e-12)
    assert np.allclose(V.T @ V, np.eye(2), atol=1e-12)
    W = smallest_singular_subspace(np.eye(6), 2)
    assert np.isclose(np.linalg.norm(W) ** 2, 2.0)


def test_smallest_subspace_nonsymmetric_matches_svd(rng):
    g, _ = random_qsc_graph(6, 0.4, rng)
    t = {e: rng.standard_normal((2, 2)) for e in g.edges}
    Z = build_Z(g, t)
    V = smallest_singular_subspace(Z, 2)
    s = np.linalg.svd(Z, compute_uv=False)
    assert np.isclose(np.linalg.norm(Z @ V) ** 2, np.sum(s[-2:] ** 2), rtol=1e-9)


def test_sparse_subspace_matches_dense(rng):
    g, _ = random_qsc_graph(15, 0.3, rng)
    frames = random_frames(15, 3, rng, "orthogonal")
    t = consistent_set(g, frames)
    t = {e: G + 0.05 * rng.standard_normal((3, 3)) for e, G in t.items()}
    Vd = smallest_singular_subspace(build_H(g, t, sparse=False), 3)
    Vs = smallest_singular_subspace(build_H(g, t, sparse=True), 3)
    assert np.allclose(Vd @ Vd.T, Vs @ Vs.T, atol=1e-8)


def test_spectral_radius(rng):
    assert np.isclose(spectral_radius(np.eye(7)), 1.0)
    assert np.isclose(spectral_radius(np.diag([1.0, 2.0, 3.0])), 3.0, rtol=1e-8)
    g, _ = random_qsc_graph(10, 0.5, rng)
    t = {e: np.linalg.qr(rng.standard_normal((3, 3)))[0] for e in g.edges}
    H = build_H(g, t)
    oracle = np.abs(np.linalg.eigvalsh(H)).max()
    assert abs(spectral_radius(H, tol=1e-12) - oracle) <= 1e-6 * oracle


def test_balanced_perturbation_keeps_kernel(rng):
    # node 0 has two out-edges; scaling them by (1 + a) and (1 - a) keeps ker Z
    g = FrameGraph(4, frozenset({(0, 1), (0, 2), (1, 3), (2, 3), (3, 0)}))
    frames = random_frames(4, 3, rng)
    t = consistent_set(g, frames)
    a = 0.1
    t[0, 1] = (1 + a) * t[0, 1]
    t[0, 2] = (1 - a) * t[0, 2]
    assert kernel_dimension(build_Z(g, t)) >= 3


def test_json_dump():
    out = to_json(np.arange(4.0).reshape(2, 2))
    assert out == {"shape": [2, 2], "data": [0.0, 1.0, 2.0, 3.0]}
