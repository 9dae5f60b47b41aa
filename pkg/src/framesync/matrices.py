"""Block matrices built from a frame graph and its pairwise transforms.

Transforms are passed as a plain mapping ``{(i, j): G_ij}`` of d x d arrays.
Block matrices are dense ``(n*d, n*d)`` arrays up to ``DENSE_LIMIT`` rows and
``scipy.sparse`` CSR matrices above it.
"""
from __future__ import annotations

from typing import Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, MissingTransform
from .graph import FrameGraph, reverse

DENSE_LIMIT = 2000

EdgeTransforms = Mapping[tuple[int, int], np.ndarray]


def transform_dim(t: EdgeTransforms) -> int:
    for G in t.values():
        return int(np.shape(G)[0])
    raise ValueError("cannot infer dimension from an empty transform set")


def block(M, i: int, j: int, d: int) -> np.ndarray:
    """The (i, j) d x d block of a block matrix."""
    B = M[i * d:(i + 1) * d, j * d:(j + 1) * d]
    return B.toarray() if sp.issparse(B) else np.asarray(B)


def stack_blocks(V: np.ndarray, d: int) -> np.ndarray:
    """View an (n*d, k) matrix as an (n, d, k) array of row blocks."""
    return V.reshape(-1, d, V.shape[1])


def reversed_transforms(g: FrameGraph, t: EdgeTransforms) -> dict:
    """Transforms of the reversed graph: edge (j, i) carries ``G_ij^T``."""
    return {(j, i): np.asarray(t[i, j]).T for i, j in g.edges}


def _check(g: FrameGraph, t: EdgeTransforms) -> None:
    missing = [e for e in g.edges if e not in t]
    if missing:
        raise MissingTransform(f"no transform for edges {sorted(missing)[:5]}")


def _use_sparse(n: int, d: int, sparse: bool | None) -> bool:
    return n * d > DENSE_LIMIT if sparse is None else sparse


def _assemble(n: int, d: int, blocks: dict, sparse: bool):
    if not sparse:
        M = np.zeros((n * d, n * d))
        for (i, j), B in blocks.items():
            M[i * d:(i + 1) * d, j * d:(j + 1) * d] += B
        return M
    rows, cols, vals = [], [], []
    r, c = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    for (i, j), B in blocks.items():
        rows.append((i * d + r).ravel())
        cols.append((j * d + c).ravel())
        vals.append(np.asarray(B).ravel())
    if not vals:
        return sp.csr_matrix((n * d, n * d))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n * d, n * d))


def build_W(g: FrameGraph, t: EdgeTransforms, d: int | None = None, sparse: bool | None = None):
    """Block matrix with ``G_ij`` at block (i, j) for every edge and zeros elsewhere."""
    _check(g, t)
    d = transform_dim(t) if d is None else d
    blocks = {(i, j): np.asarray(t[i, j], dtype=float) for i, j in g.edges}
    return _assemble(g.n, d, blocks, _use_sparse(g.n, d, sparse))


def build_Z(g: FrameGraph, t: EdgeTransforms, d: int | None = None, sparse: bool | None = None):
    """Out-degree diagonal (Kronecker I_d) minus W."""
    _check(g, t)
    d = transform_dim(t) if d is None else d
    blocks = {(i, j): -np.asarray(t[i, j], dtype=float) for i, j in g.edges}
    eye = np.eye(d)
    for i, deg in enumerate(g.out_degrees()):
        if deg:
            blocks[i, i] = deg * eye
    return _assemble(g.n, d, blocks, _use_sparse(g.n, d, sparse))


def build_Z2(g: FrameGraph, t: EdgeTransforms, d: int | None = None, sparse: bool | None = None):
    """Block diagonal of ``Wb Wb^T`` minus ``Wb``, with Wb the W matrix of the reversed graph.

    Block (i, i) is the sum of ``G_ki^T G_ki`` over edges (k, i); block (i, k) is
    ``-G_ki^T``.
    """
    _check(g, t)
    d = transform_dim(t) if d is None else d
    gr = reverse(g)
    tr = reversed_transforms(g, t)
    blocks: dict = {}
    for i, j in gr.edges:
        Wb = np.asarray(tr[i, j], dtype=float)
        blocks[i, j] = -Wb
        blocks[i, i] = blocks.get((i, i), 0.0) + Wb @ Wb.T
    return _assemble(g.n, d, blocks, _use_sparse(g.n, d, sparse))


def build_H(g: FrameGraph, t: EdgeTransforms, d: int | None = None, sparse: bool | None = None):
    """Hessian of the quadratic relaxation: ``Z + Z2``."""
    return build_Z(g, t, d, sparse) + build_Z2(g, t, d, sparse)


def _is_symmetric(M) -> bool:
    if sp.issparse(M):
        return abs(M - M.T).max() <= 1e-12 * max(abs(M).max(), 1.0)
    return np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(np.abs(M).max(), 1.0))


def smallest_singular_subspace(M, d: int) -> np.ndarray:
    """Orthonormal basis of the right-singular vectors for the ``d`` smallest singular values.

    This minimises ``||M V||_F`` over ``V`` with ``V^T V = I_d``. Symmetric
    inputs go through an eigendecomposition of ``M`` itself, general inputs
    through the SVD. Sparse inputs use Lanczos iteration on ``M^T M``.
    """
    if sp.issparse(M):
        MtM = (M.T @ M).tocsc()
        shift = 1e-6 * max(spla.norm(MtM, 1), 1.0)
        # shift-invert around a small negative value keeps the factorisation nonsingular
        _, V = spla.eigsh(MtM, k=d, sigma=-shift, which="LM")
        return np.linalg.qr(V)[0]
    M = np.asarray(M, dtype=float)
    if _is_symmetric(M):
        w, U = np.linalg.eigh(M)
        # singular values of a symmetric matrix are |eigenvalues|
        order = np.argsort(np.abs(w), kind="stable")
        return U[:, order[:d]]
    _, _, Vt = np.linalg.svd(M)
    return Vt[-d:][::-1].T


def spectral_radius(M, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest singular value of ``M`` by power iteration on ``M^T M``.

    Equals the spectral radius for symmetric matrices and upper-bounds it
    otherwise.
    """
    n = M.shape[0]
    x = np.random.default_rng(0).standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        Mx = M @ x
        rq = float(Mx @ Mx)  # Rayleigh quotient of M^T M
        y = M.T @ Mx
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if abs(rq - lam) <= tol * rq:
            return float(np.sqrt(rq))
        lam = rq
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def kernel_dimension(M, tol: float = 1e-8) -> int:
    """Number of singular values below ``tol`` times the largest one."""
    M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return M.shape[0]
    return int(np.sum(s < tol * s[0]))


def to_json(M) -> dict:
    """Row-major dump of a block matrix for debugging."""
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    return {"shape": list(M.shape), "data": M.ravel().tolist()}
