"""Second-order finite-difference operators on tagged nodal fields.

Index conventions, fixed once for the whole package:

* ``[grad f]_i = d_i f`` and ``[grad v]_{i j} = d_i v_j`` (derivative
  index leads), so the transposed gradient is the Jacobian;
* ``(div A)_i = sum_j d_j A_{j i}`` for matrix fields;
* ``A : B = sum_{i j} A_{i j} B_{i j}``;
* the outer product of magnetization gradients is the symmetric matrix
  ``S_{i j} = d_i m . d_j m``.

Closures come from each field's bc tag: pinned fields (zero boundary)
and derived quantities get one-sided second-order first derivatives,
zero-normal-derivative fields get mirror reflection, periodic wraps.
Laplacians of pinned fields return zero on boundary rows; the boundary
value is data, not an evolved unknown.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .fields import DIRICHLET, FREE, NEUMANN, PERIODIC, Field, FieldError

_DERIV_CODE = {
    DIRICHLET: kernels.D_ONESIDED,
    FREE: kernels.D_ONESIDED,
    NEUMANN: kernels.D_REFLECT,
    PERIODIC: kernels.D_PERIODIC,
}

_LAP_CODE = {
    DIRICHLET: kernels.L_PIN,
    NEUMANN: kernels.L_REFLECT,
    PERIODIC: kernels.L_PERIODIC,
}


def _map_components(field: Field, fn, out_comp=None):
    spatial = field.grid.shape
    comp = field.comp_shape if out_comp is None else out_comp
    out = np.empty(comp + spatial)
    src = field.data.reshape((-1,) + spatial)
    dst = out.reshape((-1,) + spatial)
    for k in range(src.shape[0]):
        dst[k] = fn(src[k])
    return out


def deriv(field: Field, axis: int, code: int | None = None) -> Field:
    """Componentwise first derivative along one axis."""
    if code is None:
        code = _DERIV_CODE[field.bc]
    hinv = field.grid.hinv[axis]
    data = _map_components(field, lambda a: kernels.dcent(a, axis, hinv, code))
    return Field(field.grid, data, FREE if not field.grid.periodic else PERIODIC)


def gradient(field: Field) -> Field:
    """Stack of axis derivatives; derivative index leads the components."""
    g = field.grid
    parts = [deriv(field, a).data for a in range(g.dim)]
    return Field(g, np.stack(parts), FREE if not g.periodic else PERIODIC)


def laplacian(field: Field) -> Field:
    code = _LAP_CODE.get(field.bc)
    if code is None:
        raise FieldError(f"no Laplacian closure for bc tag {field.bc!r}")
    hinv2 = field.grid.hinv2
    data = _map_components(field, lambda a: kernels.lap(a, hinv2, code))
    return Field(field.grid, data, field.bc)


def divergence(v: Field) -> Field:
    """Scalar divergence of a vector field (ncomp == dim)."""
    g = v.grid
    if v.comp_shape != (g.dim,):
        raise FieldError(f"divergence expects {g.dim} components, got {v.comp_shape}")
    code = _DERIV_CODE[v.bc]
    acc = None
    for a in range(g.dim):
        term = kernels.dcent(v.data[a], a, g.hinv[a], code)
        acc = term if acc is None else acc + term
    return Field(g, acc, FREE if not g.periodic else PERIODIC)


def divergence_matrix(A: Field) -> Field:
    """(div A)_i = sum_j d_j A_{j i} for a (d, d) matrix field."""
    g = A.grid
    d = g.dim
    if A.comp_shape != (d, d):
        raise FieldError(f"divergence_matrix expects a ({d},{d}) field, got {A.comp_shape}")
    code = _DERIV_CODE[A.bc]
    out = np.empty((d,) + g.shape)
    for i in range(d):
        acc = None
        for j in range(d):
            term = kernels.dcent(A.data[j, i], j, g.hinv[j], code)
            acc = term if acc is None else acc + term
        out[i] = acc
    return Field(g, out, FREE if not g.periodic else PERIODIC)


def advect(vel: Field, field: Field) -> Field:
    """(vel . grad) field, closures taken from the transported field."""
    g = field.grid
    if vel.comp_shape != (g.dim,):
        raise FieldError("advecting velocity must have dim components")
    code = _DERIV_CODE[field.bc]
    spatial = g.shape
    src = field.data.reshape((-1,) + spatial)
    out = np.empty_like(field.data).reshape((-1,) + spatial)
    for k in range(src.shape[0]):
        acc = None
        for a in range(g.dim):
            term = vel.data[a] * kernels.dcent(src[k], a, g.hinv[a], code)
            acc = term if acc is None else acc + term
        out[k] = acc
    return Field(g, out.reshape(field.data.shape), FREE if not g.periodic else PERIODIC)


# ---------------------------------------------------------------------------
# nodal (stencil-free) algebra


def cross_matrix(m) -> np.ndarray:
    """Skew matrix array M with M v = m x v nodewise; shape (3, 3, *spatial)."""
    md = m.data if isinstance(m, Field) else np.asarray(m)
    z = np.zeros_like(md[0])
    return np.array([[z, -md[2], md[1]],
                     [md[2], z, -md[0]],
                     [-md[1], md[0], z]])


def nodal_matvec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply a nodal (k, k) matrix array to a k-component array."""
    return np.einsum("ab...,b...->a...", A, v)


def double_dot(A: Field, B: Field) -> Field:
    """A : B for matrix fields."""
    return Field(A.grid, np.einsum("ij...,ij...->...", A.data, B.data),
                 FREE if not A.grid.periodic else PERIODIC)


def matrix_vector(A: Field, v: Field) -> Field:
    """(A v)_i = A_{i j} v_j nodewise."""
    return Field(A.grid, np.einsum("ij...,j...->i...", A.data, v.data),
                 FREE if not A.grid.periodic else PERIODIC)


def grad_norm2(m: Field) -> Field:
    """|grad m|^2 = sum over axes and components of squared derivatives."""
    G = gradient(m)
    return Field(m.grid, np.einsum("jc...,jc...->...", G.data, G.data), G.bc)


def double_cross(m: Field) -> Field:
    """m x (m x lap m) nodewise."""
    lm = laplacian(m).data
    inner = np.cross(m.data, lm, axis=0)
    return Field(m.grid, np.cross(m.data, inner, axis=0),
                 FREE if not m.grid.periodic else PERIODIC)


def grad_outer(m: Field) -> Field:
    """Symmetric matrix S_{i j} = d_i m . d_j m of gradient overlaps."""
    g = m.grid
    G = gradient(m).data  # (d, 3, *spatial)
    S = np.einsum("ic...,jc...->ij...", G, G)
    return Field(g, S, FREE if not g.periodic else PERIODIC)


def magnetic_stress_div(m: Field) -> Field:
    """Divergence of the magnetization stress, in the form
    [B m]_i = d_i m . lap m + sum_{j,c} d_j m_c d_i d_j m_c."""
    g = m.grid
    G = gradient(m)          # (d, 3)
    L = laplacian(m).data    # (3,)
    out = np.empty((g.dim,) + g.shape)
    dG = [deriv(G, i).data for i in range(g.dim)]  # d_i of every d_j m_c
    for i in range(g.dim):
        out[i] = np.einsum("c...,c...->...", G.data[i], L) \
            + np.einsum("jc...,jc...->...", G.data, dG[i])
    return Field(g, out, FREE if not g.periodic else PERIODIC)


def stress_div_direct(m: Field) -> Field:
    """Same stress divergence, via the assembled matrix field (test route)."""
    return divergence_matrix(grad_outer(m))


def stress_div_gradform(m: Field) -> Field:
    """Third route: (grad m) lap m + grad(|grad m|^2) / 2."""
    g = m.grid
    G = gradient(m).data
    L = laplacian(m).data
    first = np.einsum("ic...,c...->i...", G, L)
    gn2 = grad_norm2(m)
    half_grad = 0.5 * gradient(gn2).data
    return Field(g, first + half_grad, FREE if not g.periodic else PERIODIC)


def elastic_stress(F: Field) -> Field:
    """F F^T nodewise."""
    return Field(F.grid, np.einsum("ik...,jk...->ij...", F.data, F.data),
                 FREE if not F.grid.periodic else PERIODIC)


def elastic_stress_div(F: Field) -> Field:
    return divergence_matrix(elastic_stress(F))


# ---------------------------------------------------------------------------
# model right-hand sides


def llg_rhs(m: Field, u: Field | None, alpha: float, beta: float) -> Field:
    """Reformulated magnetization equation right-hand side:
    (alpha I - beta M(m)) lap m + alpha |grad m|^2 m - (u . grad) m."""
    L = laplacian(m).data
    rot = np.cross(m.data, L, axis=0)
    rhs = alpha * L - beta * rot + alpha * grad_norm2(m).data * m.data
    if u is not None:
        rhs = rhs - advect(u, m).data
    return Field(m.grid, rhs, FREE if not m.grid.periodic else PERIODIC)


def deformation_rhs(F: Field, u: Field, kappa: float) -> Field:
    """kappa lap F + (grad u)^T F - (u . grad) F, with
    ((grad u)^T F)_{i j} = sum_k d_k u_i F_{k j}."""
    Gu = gradient(u).data  # (d, d): [k, i] = d_k u_i
    stretch = np.einsum("ki...,kj...->ij...", Gu, F.data)
    rhs = kappa * laplacian(F).data + stretch - advect(u, F).data
    return Field(F.grid, rhs, FREE if not F.grid.periodic else PERIODIC)


def momentum_rhs(u: Field, F: Field, m: Field, pi: Field, mu_s: float) -> Field:
    """mu_s lap u - (u . grad) u - grad pi - div(grad m outer grad m) + div(F F^T).

    Laplacian rows on the boundary are zero (pinned field); use interior
    nodes when measuring residuals.
    """
    rhs = mu_s * laplacian(u).data - advect(u, u).data \
        - gradient(pi).data - magnetic_stress_div(m).data \
        + elastic_stress_div(F).data
    return Field(u.grid, rhs, FREE if not u.grid.periodic else PERIODIC)
