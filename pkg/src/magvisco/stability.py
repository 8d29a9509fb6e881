"""Linear stability analysis of the rest states.

At a rest state (u, F, m, pi) = (0, 0, m*, const), m* a constant unit
vector, the linearized generator decouples into three blocks,

    u:  mu_s P lap          (Dirichlet, composed with the Leray projection)
    F:  kappa lap           (Dirichlet, componentwise)
    m:  (alpha I3 - beta M(m*)) lap    (Neumann; M(m*) w = m* x w)

because every coupling term of the model is at least quadratic in the
perturbation: the stresses are quadratic in (grad m, F), transport is
quadratic, and |grad m*|^2 = 0.  The spectrum lies in the closed left
half plane with a semisimple three-dimensional kernel spanned by the
constant-magnetization modes — the tangent directions of the manifold
of rest states.

The u block is realized as the W-orthogonal compression of mu_s lap
onto the discrete solenoidal subspace {v interior-supported: G^T W v =
0}.  The projection P is W-self-adjoint and fixes that subspace
pointwise, so the compressed matrix <b_i, lap b_j>_W equals the matrix
of P lap restricted to its invariant subspace; no explicit P needed.

Block-diagonal structure is exploited throughout: singular values and
eigenvalues of a block-diagonal matrix are the unions over blocks, so
kernel and semisimplicity checks run per block at a fraction of the
full dense cost (the kernel can only live in the m block; the u block
is nonsingular, the F block symmetric negative definite).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import kernels, sparseops
from .fields import Field, State, norm_L2
from .grid import Grid
from .operators import cross_matrix
from .params import Params


class StabilityError(RuntimeError):
    pass


_DOF_BUDGET = 20_000  # nodes x components; dense factorizations beyond this stall


# ---------------------------------------------------------------------------
# assembly


def _interior_index(grid: Grid) -> np.ndarray:
    if grid.periodic:
        return np.arange(grid.n_nodes)
    return np.nonzero(~grid.boundary_mask().reshape(-1))[0]


def _solenoidal_compression(grid: Grid):
    """W-orthonormal basis B of the discrete solenoidal subspace and the
    compressed unit-viscosity block B^T W lap B (both cached per grid)."""
    key = (grid, "stability-u")
    if key in sparseops._cache:
        return sparseops._cache[key]
    d = grid.dim
    w = grid.quad_weights().reshape(-1)
    idx = _interior_index(grid)
    ni = idx.size
    Gs = sparseops.grad_matrices(grid)
    W = sparseops.weight_diag(grid)
    C = np.hstack([(Gs[a].T @ W).toarray()[:, idx] for a in range(d)])
    B0 = scipy.linalg.null_space(C)
    wvec = np.concatenate([w[idx]] * d)
    gram = B0.T @ (wvec[:, None] * B0)
    low = np.linalg.cholesky(gram)
    B = scipy.linalg.solve_triangular(low, B0.T, lower=True).T  # B^T W B = I

    code = kernels.L_PERIODIC if grid.periodic else kernels.L_PIN
    Ld = sparseops.lap_matrix(grid, code)[np.ix_(idx, idx)]
    k = B.shape[1]
    Bc = B.reshape(d, ni, k)
    block = np.zeros((k, k))
    for a in range(d):
        block += Bc[a].T @ (w[idx][:, None] * (Ld @ Bc[a]))
    sparseops._cache[key] = (B, block, Ld)
    return sparseops._cache[key]


@dataclass
class LinearizedOperator:
    grid: Grid
    m_star: np.ndarray
    params: Params
    u_basis: np.ndarray      # (d*ni, k), W-orthonormal columns
    u_block: np.ndarray      # (k, k) dense: mu_s * compression of lap
    F_lap: sp.spmatrix       # interior Dirichlet Laplacian, one component
    m_lap: sp.spmatrix       # Neumann (reflect) Laplacian, one component
    m_coeff: np.ndarray      # 3x3 nodal matrix beta M(m*) - alpha I3

    @property
    def m_block(self) -> sp.spmatrix:
        # generator block (alpha I - beta M) lap == kron(-m_coeff, m_lap)
        return sp.kron(-self.m_coeff, self.m_lap, format="csr")

    @property
    def F_block(self) -> sp.spmatrix:
        d2 = self.grid.dim ** 2
        return self.params.kappa * sp.block_diag([self.F_lap] * d2, format="csr")

    @property
    def dof(self) -> int:
        return self.u_block.shape[0] + self.F_block.shape[0] + 3 * self.m_lap.shape[0]

    def full_matrix(self) -> sp.csr_matrix:
        return sp.block_diag(
            [sp.csr_matrix(self.u_block), self.F_block, self.m_block],
            format="csr")


def assemble_linearization(grid: Grid, m_star, params: Params) -> LinearizedOperator:
    """Discrete generator blocks at the rest state with magnetization m*."""
    m_star = np.asarray(m_star, dtype=np.float64)
    if m_star.shape != (3,) or abs(np.linalg.norm(m_star) - 1.0) > 1e-10:
        raise StabilityError("m* must be a unit 3-vector")
    if (grid.dim ** 2 + grid.dim + 3) * grid.n_nodes > _DOF_BUDGET * 4:
        raise StabilityError(
            f"{grid.n_nodes} nodes exceeds the dense-analysis budget")
    B, block_unit, Ld = _solenoidal_compression(grid)
    code = kernels.L_PERIODIC if grid.periodic else kernels.L_REFLECT
    Ln = sparseops.lap_matrix(grid, code)
    M = cross_matrix(m_star.reshape(3, 1)).reshape(3, 3)
    coeff = params.beta * M - params.alpha * np.eye(3)
    return LinearizedOperator(grid, m_star, params, B,
                              params.mu_s * block_unit, Ld, Ln, coeff)


# ---------------------------------------------------------------------------
# spectrum and kernel


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray       # sorted by real part, ascending
    n_zero: int                   # |lambda| <= zero_tol
    max_real: float
    min_real: float
    gap: float                    # min |Re| over eigenvalues with |lambda| > zero_tol
    kernel_dim: int
    kernel_angle: float           # worst principal angle to the constant-m modes
    semisimple: bool
    sv_gap: float
    zero_tol: float

    def to_text(self, header: str = "", list_all: bool = False) -> str:
        lines = []
        if header:
            lines.append(header)
        lines.append(f"eigenvalues: {self.eigenvalues.size}")
        lines.append(f"max Re = {self.max_real:.6e}   min Re = {self.min_real:.6e}")
        lines.append(f"zero modes (|lambda| <= {self.zero_tol:.1e}): {self.n_zero}")
        lines.append(f"spectral gap = {self.gap:.6e}")
        lines.append(f"kernel dim = {self.kernel_dim}, "
                     f"angle to constant-m modes = {self.kernel_angle:.3e}")
        lines.append(f"semisimple = {self.semisimple} (sv gap {self.sv_gap:.3e})")
        shown = self.eigenvalues if list_all else self.eigenvalues[-12:]
        label = "re, im" if list_all else \
            f"re, im (largest {shown.size} of {self.eigenvalues.size} by Re)"
        lines.append(label)
        for lam in shown:
            lines.append(f"{lam.real:.17g}, {lam.imag:.17g}")
        return "\n".join(lines) + "\n"


def _nullspace_dim(sv: np.ndarray, rel_tol: float, scale: float | None = None):
    """(dim, gap) from descending singular values: dim below rel_tol*scale,
    gap = smallest kept / largest dropped (inf when nothing is dropped).

    scale defaults to the largest singular value; pass one explicitly for
    matrices whose natural magnitude is known externally (A^2 can be an
    exact zero matrix, where its own sv[0] is a useless scale).
    """
    if sv.size == 0:
        return 0, float("inf")
    if scale is None and sv[0] == 0.0:
        return int(sv.size), float("inf")  # exact zero matrix
    cut = rel_tol * (sv[0] if scale is None else scale)
    dropped = sv[sv < cut]
    kept = sv[sv >= cut]
    if dropped.size == 0:
        return 0, float("inf")
    if kept.size == 0 or dropped[0] == 0.0:
        return int(dropped.size), float("inf")
    return int(dropped.size), float(kept[-1] / dropped[0])


def matrix_semisimplicity(mat: np.ndarray, rel_tol: float = 1e-8):
    """(dim N(A), dim N(A^2), gap, flag) for a dense matrix via SVD.

    The singular-value gap is the worse of the two rank decisions; a
    gap below 1e2 means the threshold is ambiguous and the flag is not
    trustworthy, so the check fails.
    """
    mat = np.asarray(mat, dtype=float)
    s1 = np.linalg.svd(mat, compute_uv=False)
    s2 = np.linalg.svd(mat @ mat, compute_uv=False)
    d1, g1 = _nullspace_dim(s1, rel_tol)
    d2, g2 = _nullspace_dim(s2, rel_tol,
                            scale=float(s1[0] ** 2) if s1.size and s1[0] > 0 else None)
    gap = min(g1, g2)
    return d1, d2, gap, (d1 == d2 and gap >= 1e2)


@dataclass
class SemisimplicityReport:
    dim_kernel: int
    dim_kernel_sq: int
    sv_gap: float
    semisimple: bool


def semisimplicity_check(op: LinearizedOperator, rel_tol: float = 1e-8) -> SemisimplicityReport:
    """Compare N(A) against N(A^2) blockwise.

    The u block is checked for invertibility only (no kernel can hide in
    a nonsingular block), the F block is symmetric (semisimple by
    construction, kernel from its eigenvalues), and the m block gets the
    full dense SVD treatment.
    """
    su = np.linalg.svd(op.u_block, compute_uv=False)
    du, gu = _nullspace_dim(su, rel_tol)
    ev_F = scipy.linalg.eigvalsh(op.F_lap.toarray())
    dF = int(np.sum(np.abs(ev_F) < rel_tol * np.abs(ev_F).max())) * op.grid.dim ** 2
    dm1, dm2, gm, okm = matrix_semisimplicity(op.m_block.toarray(), rel_tol)
    dim1 = du + dF + dm1
    dim2 = du + dF + dm2  # u nonsingular and F symmetric add nothing new in A^2
    gap = min(gu, gm)
    return SemisimplicityReport(dim1, dim2, gap,
                                bool(du == 0 and okm and dim1 == dim2))


def _constant_m_basis(op: LinearizedOperator) -> np.ndarray:
    """Orthonormal full-coordinate basis of the constant-m modes."""
    n = op.m_lap.shape[0]
    total = op.dof
    off = op.u_block.shape[0] + op.F_block.shape[0]
    out = np.zeros((total, 3))
    for c in range(3):
        out[off + c * n: off + (c + 1) * n, c] = 1.0 / np.sqrt(n)
    return out


def spectrum(op: LinearizedOperator, zero_tol: float = 1e-8) -> SpectrumReport:
    """Eigenvalues of the generator, assembled blockwise (exact for a
    block-diagonal matrix), with kernel and semisimplicity diagnostics."""
    ev_u = scipy.linalg.eigvals(op.u_block)
    ev_F = op.params.kappa * np.repeat(
        scipy.linalg.eigvalsh(op.F_lap.toarray()), op.grid.dim ** 2)
    m_dense = op.m_block.toarray()
    ev_m, vec_m = scipy.linalg.eig(m_dense)
    lams = np.concatenate([ev_u, ev_F.astype(complex), ev_m])
    order = np.lexsort((lams.imag, lams.real))
    lams = lams[order]

    zero = np.abs(lams) <= zero_tol
    n_zero = int(zero.sum())
    nz = lams[~zero]
    gap = float(np.abs(nz.real).min()) if nz.size else float("inf")

    # kernel lives in the m block only; lift its singular vectors
    _, s, Vh = np.linalg.svd(m_dense)
    dkm, svgap = _nullspace_dim(s, 1e-8)
    off = op.u_block.shape[0] + op.F_block.shape[0]
    kernel = np.zeros((op.dof, dkm))
    kernel[off:, :] = Vh[len(s) - dkm:].conj().T.real if dkm else 0.0
    const = _constant_m_basis(op)
    if dkm:
        q_k, _ = np.linalg.qr(kernel)
        cos = np.linalg.svd(q_k.T @ const, compute_uv=False)
        angle = float(np.arccos(np.clip(cos.min(), -1.0, 1.0)))
    else:
        angle = float("nan")
    ss = semisimplicity_check(op)
    return SpectrumReport(lams, n_zero, float(lams.real.max()),
                          float(lams.real.min()), gap, dkm, angle,
                          ss.semisimple, ss.sv_gap, zero_tol)


def random_unit_vectors(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# trajectory-side diagnostics


@dataclass
class EquilibriumReport:
    m_star: np.ndarray
    mean_norm: float        # |mean m| before normalization
    distance: float
    within_tol: bool


def detect_equilibrium(state: State, tol: float = 1e-6) -> EquilibriumReport:
    """Nearest rest state (0, 0, mean(m)/|mean(m)|) and the L2 distance
    ||u|| + ||F|| + ||m - m*||."""
    w = state.grid.quad_weights()
    vol = float(np.sum(w))
    mbar = np.array([float(np.sum(w * comp)) for comp in state.m.data]) / vol
    norm = float(np.linalg.norm(mbar))
    if norm < 1e-8:
        raise StabilityError("mean magnetization is ~0; no nearby rest state")
    m_star = mbar / norm
    diff = Field(state.grid, state.m.data - m_star.reshape((3,) + (1,) * state.grid.dim),
                 state.m.bc)
    dist = norm_L2(state.u) + norm_L2(state.F) + norm_L2(diff)
    return EquilibriumReport(m_star, norm, dist, bool(dist <= tol))


@dataclass
class DecayFit:
    rate: float
    intercept: float
    r2: float
    n_used: int
    t_window: tuple
    decaying: bool


def fit_decay_rate(times, distances, floor: float | None = None,
                   t_min: float | None = None, t_max: float | None = None) -> DecayFit:
    """Least-squares slope of log(distance) vs t over a clipped window.

    Points at or below ``floor`` (default 10 x eps x max distance) are
    dropped: below that the distance is rounding noise, not dynamics.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(distances, dtype=float)
    if t.shape != d.shape or t.size < 3:
        raise ValueError("need matching time/distance arrays with >= 3 entries")
    if floor is None:
        floor = 10.0 * np.finfo(float).eps * float(d.max())
    keep = d > max(floor, 0.0)
    if t_min is not None:
        keep &= t >= t_min
    if t_max is not None:
        keep &= t <= t_max
    t, d = t[keep], d[keep]
    if t.size < 3:
        raise ValueError("fewer than 3 usable points above the distance floor")
    y = np.log(d)
    slope, intercept = np.polyfit(t, y, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    decaying = bool(slope < 0 and r2 >= 0.99)
    return DecayFit(float(slope), float(intercept), r2, int(t.size),
                    (float(t[0]), float(t[-1])), decaying)
