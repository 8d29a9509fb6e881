"""Sparse matrix realizations of the stencil operators.

Matrices are extracted by applying the active kernel backend to nodal
basis vectors, so matrix and kernel agree exactly by construction. They
are cached per (grid, operator) and used where a transpose or an
eigendecomposition is required (projection normal operator, linearized
blocks); time-stepping right-hand sides stay on the kernel path.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import kernels
from .grid import Grid

_cache: dict = {}


def _extract(apply_fn, shape) -> sp.csr_matrix:
    n = int(np.prod(shape))
    e = np.zeros(shape)
    rows = []
    cols = []
    vals = []
    flat = e.reshape(-1)
    for j in range(n):
        flat[j] = 1.0
        col = apply_fn(e).reshape(-1)
        flat[j] = 0.0
        nz = np.nonzero(col)[0]
        rows.append(nz)
        cols.append(np.full(nz.size, j))
        vals.append(col[nz])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def lap_matrix(grid: Grid, code: int) -> sp.csr_matrix:
    """Compact Laplacian of one component as an (n, n) sparse matrix."""
    key = (grid, "lap", code)
    if key not in _cache:
        hinv2 = grid.hinv2
        _cache[key] = _extract(lambda a: kernels.lap(a, hinv2, code), grid.shape)
    return _cache[key]


def dcent_matrix(grid: Grid, axis: int, code: int) -> sp.csr_matrix:
    """Centered first derivative along one axis as a sparse matrix."""
    key = (grid, "dcent", axis, code)
    if key not in _cache:
        hinv = grid.hinv[axis]
        _cache[key] = _extract(lambda a: kernels.dcent(a, axis, hinv, code), grid.shape)
    return _cache[key]


def weight_diag(grid: Grid) -> sp.dia_matrix:
    key = (grid, "w")
    if key not in _cache:
        _cache[key] = sp.diags(grid.quad_weights().reshape(-1))
    return _cache[key]


def grad_matrices(grid: Grid) -> list[sp.csr_matrix]:
    """Reflect-closure gradient components (the projection's G)."""
    code = kernels.D_PERIODIC if grid.periodic else kernels.D_REFLECT
    return [dcent_matrix(grid, a, code) for a in range(grid.dim)]


def wide_poisson_matrix(grid: Grid) -> sp.csr_matrix:
    """Normal operator A = sum_a G_a^T W G_a of the discrete Helmholtz
    decomposition (symmetric positive semidefinite, wide stencil)."""
    key = (grid, "wide")
    if key not in _cache:
        W = weight_diag(grid)
        A = None
        for G in grad_matrices(grid):
            term = (G.T @ (W @ G)).tocsr()
            A = term if A is None else A + term
        _cache[key] = A.tocsr()
    return _cache[key]


def compact_neumann_system(grid: Grid):
    """(A, L) with L the reflect-closure Laplacian and A = -W L, the
    symmetric positive semidefinite form used by the scalar Poisson solve."""
    key = (grid, "compact-neumann")
    if key not in _cache:
        code = kernels.L_PERIODIC if grid.periodic else kernels.L_REFLECT
        L = lap_matrix(grid, code)
        A = (-(weight_diag(grid) @ L)).tocsr()
        _cache[key] = (A, L)
    return _cache[key]
