"""Discrete pressure Poisson solves and the Helmholtz (Leray) projection.

The projection is defined variationally: psi solves

    (grad psi | grad phi)_W = (v | grad phi)_W   for every nodal phi,

with the reflect-closure gradient G and trapezoidal weights W, i.e. the
normal equations A psi = G^T W v with the wide-stencil matrix
A = G^T W G. The corrected field v - G psi is then W-orthogonal to every
discrete gradient and the energy split is exact to solver tolerance.
The centered divergence vanishes at interior nodes when v has zero
normal trace (the solver's use case); a nonzero trace cannot be
corrected -- G psi has zero normal component -- so its incompatibility
concentrates on the first node ring while deeper nodes still satisfy
the adjoint conditions. Constant and per-axis alternating modes span
ker A; CG iterates started from zero never leave their orthogonal
complement, so the correction is unique.

Box grids use CG (relative tolerance, iteration cap 10 * n_nodes);
periodic grids invert the discrete symbols by FFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels, sparseops
from .fields import FREE, NEUMANN, PERIODIC, Field, FieldError
from .grid import Grid
from .linsolve import cg


@dataclass
class PoissonResult:
    psi: Field
    solver: str
    iterations: int
    residual: float
    mean_removed: float = 0.0
    warnings: list = dc_field(default_factory=list)


@dataclass
class HelmholtzResult:
    v_sigma: Field
    grad_psi: Field
    psi: Field
    solver: str
    iterations: int
    residual: float


def weighted_mean(grid: Grid, values: np.ndarray) -> float:
    w = grid.quad_weights()
    return float(np.sum(w * values) / np.sum(w))


def _compact_symbol(grid: Grid) -> np.ndarray:
    lam = np.zeros(grid.shape)
    for a in range(grid.dim):
        k = np.arange(grid.shape[a])
        sym = (2.0 * np.cos(2.0 * np.pi * k / grid.shape[a]) - 2.0) * grid.hinv2[a]
        lam = lam + sym.reshape([-1 if b == a else 1 for b in range(grid.dim)])
    return lam


def _wide_symbol(grid: Grid) -> np.ndarray:
    lam = np.zeros(grid.shape)
    for a in range(grid.dim):
        k = np.arange(grid.shape[a])
        sig = np.sin(2.0 * np.pi * k / grid.shape[a]) * grid.hinv[a]
        lam = lam - (sig * sig).reshape([-1 if b == a else 1 for b in range(grid.dim)])
    return lam


def _fft_solve(rhs: np.ndarray, lam: np.ndarray) -> np.ndarray:
    # Kernel modes (constant; alternating modes for the wide symbol) carry
    # symbols that are only rounding-level nonzero; threshold them away.
    rhat = np.fft.fftn(rhs)
    psihat = np.zeros_like(rhat)
    nz = np.abs(lam) > 1e-12 * np.abs(lam).max()
    psihat[nz] = rhat[nz] / lam[nz]
    return np.real(np.fft.ifftn(psihat))


def pressure_poisson(rhs: Field, tol: float = 1e-10, maxiter: int | None = None) -> PoissonResult:
    """Solve lap psi = rhs with zero-normal-derivative (or periodic)
    closure; the weighted mean of rhs is removed first and psi is pinned
    to weighted mean zero."""
    if not rhs.is_scalar:
        raise FieldError("pressure_poisson expects a scalar right-hand side")
    g = rhs.grid
    warnings = []
    mean = weighted_mean(g, rhs.data)
    if abs(mean) > 1e-13 * max(1.0, float(np.abs(rhs.data).max())):
        warnings.append(f"compatibility: removed right-hand-side mean {mean:.3e}")
    b_data = rhs.data - mean
    if g.periodic:
        psi = _fft_solve(b_data, _compact_symbol(g))
        psi -= weighted_mean(g, psi)
        res = kernels.lap(psi, g.hinv2, kernels.L_PERIODIC) - b_data
        rel = float(np.linalg.norm(res) / max(np.linalg.norm(b_data), 1e-300))
        return PoissonResult(Field(g, psi, PERIODIC), "fft", 0, rel, mean, warnings)
    A, L = sparseops.compact_neumann_system(g)
    w = g.quad_weights().reshape(-1)
    b = -(w * b_data.reshape(-1))
    if maxiter is None:
        maxiter = 10 * g.n_nodes
    x, info = cg(lambda p: A @ p, b, tol=tol, maxiter=maxiter)
    x = x - float(np.sum(w * x) / np.sum(w))
    psi = x.reshape(g.shape)
    res = (L @ x).reshape(g.shape) - b_data
    rel = float(np.linalg.norm(res) / max(np.linalg.norm(b_data), 1e-300))
    return PoissonResult(Field(g, psi, NEUMANN), "cg", info.iterations, rel, mean, warnings)


def grad_scalar(psi: Field) -> Field:
    """Reflect/periodic-closure gradient of a scalar (the projection's G)."""
    g = psi.grid
    code = kernels.D_PERIODIC if g.periodic else kernels.D_REFLECT
    data = np.stack([kernels.dcent(psi.data, a, g.hinv[a], code) for a in range(g.dim)])
    return Field(g, data, FREE if not g.periodic else PERIODIC)


def helmholtz_project(v: Field, tol: float = 1e-10, maxiter: int | None = None) -> HelmholtzResult:
    """Split v into a discretely divergence-free part and a gradient.

    Returns v_sigma = v - grad psi keeping v's tag; the normal component
    of the correction vanishes on faces, so v_sigma . n = v . n there.
    """
    g = v.grid
    if v.comp_shape != (g.dim,):
        raise FieldError("helmholtz_project expects a velocity-shaped field")
    if g.periodic:
        code = kernels.D_PERIODIC
        div = None
        for a in range(g.dim):
            term = kernels.dcent(v.data[a], a, g.hinv[a], code)
            div = term if div is None else div + term
        psi_data = _fft_solve(div, _wide_symbol(g))
        psi = Field(g, psi_data, PERIODIC)
        gp = grad_scalar(psi)
        v_sigma = Field(g, v.data - gp.data, v.bc)
        return HelmholtzResult(v_sigma, gp, psi, "fft", 0, 0.0)
    A = sparseops.wide_poisson_matrix(g)
    Gs = sparseops.grad_matrices(g)
    w = g.quad_weights().reshape(-1)
    b = np.zeros(g.n_nodes)
    for a in range(g.dim):
        b += Gs[a].T @ (w * v.data[a].reshape(-1))
    if maxiter is None:
        maxiter = 10 * g.n_nodes
    x, info = cg(lambda p: A @ p, b, tol=tol, maxiter=maxiter)
    x = x - float(np.sum(w * x) / np.sum(w))
    psi = Field(g, x.reshape(g.shape), NEUMANN)
    gp = grad_scalar(psi)
    v_sigma = Field(g, v.data - gp.data, v.bc)
    return HelmholtzResult(v_sigma, gp, psi, "cg", info.iterations, info.residual)


def interior_divergence_max(v: Field) -> float:
    """max |centered div v| over interior nodes (all nodes when periodic)."""
    g = v.grid
    code = kernels.D_PERIODIC if g.periodic else kernels.D_ONESIDED
    div = None
    for a in range(g.dim):
        term = kernels.dcent(v.data[a], a, g.hinv[a], code)
        div = term if div is None else div + term
    return float(np.abs(div[g.interior]).max())
