"""Nodal fields over a grid, with boundary-condition tags and quadrature.

A field stores one float64 value per node and component. Component axes
lead: scalars are shaped like the grid, vectors ``(ncomp, *grid.shape)``,
matrices ``(d, d, *grid.shape)``. The magnetization keeps three
components in both 2d and 3d runs.

The bc tag selects stencil closures downstream: ``dirichlet-zero`` fields
are pinned to zero boundary values, ``neumann-zero`` fields use mirror
reflection (zero normal derivative), ``none`` marks derived quantities
differentiated one-sidedly at the boundary, ``periodic`` wraps.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid

DIRICHLET = "dirichlet-zero"
NEUMANN = "neumann-zero"
PERIODIC = "periodic"
FREE = "none"

_TAGS = (DIRICHLET, NEUMANN, PERIODIC, FREE)


class FieldError(ValueError):
    """Raised for malformed fields or mismatched operands."""


class ConstraintError(RuntimeError):
    """Raised when the unit-sphere constraint degenerates (|m| ~ 0)."""


@dataclass
class Field:
    grid: Grid
    data: np.ndarray
    bc: str = FREE

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        d = self.grid.dim
        if self.data.ndim < d or self.data.shape[self.data.ndim - d:] != self.grid.shape:
            raise FieldError(
                f"data shape {self.data.shape} does not end in grid shape {self.grid.shape}")
        if self.bc not in _TAGS:
            raise FieldError(f"unknown bc tag {self.bc!r}")
        if (self.bc == PERIODIC) != self.grid.periodic:
            raise FieldError("periodic tag is allowed exactly on periodic grids")

    @property
    def comp_shape(self) -> tuple[int, ...]:
        return self.data.shape[: self.data.ndim - self.grid.dim]

    @property
    def is_scalar(self) -> bool:
        return self.comp_shape == ()

    def components(self):
        """Iterate over component arrays (the scalar itself if rank 0)."""
        if self.is_scalar:
            yield self.data
        else:
            flat = self.data.reshape((-1,) + self.grid.shape)
            yield from flat

    def copy(self) -> "Field":
        return replace(self, data=self.data.copy())


def sample(grid: Grid, fn, bc: str = FREE, comp_shape: tuple[int, ...] | None = None) -> Field:
    """Evaluate ``fn(*node_coords)`` on the grid and wrap it as a Field.

    ``fn`` may return an array or a (nested) sequence of arrays/scalars;
    components lead in the result.
    """
    raw = fn(*grid.coords())
    if isinstance(raw, (tuple, list)):
        raw = np.stack([np.broadcast_to(np.asarray(c, dtype=np.float64), grid.shape)
                        if np.ndim(c) <= grid.dim else np.asarray(c, dtype=np.float64)
                        for c in _flatten_components(raw)])
        if comp_shape:
            raw = raw.reshape(comp_shape + grid.shape)
    else:
        raw = np.asarray(raw, dtype=np.float64)
        if raw.shape[-grid.dim:] != grid.shape:
            raw = np.broadcast_to(raw, (comp_shape or ()) + grid.shape).copy()
    f = Field(grid, raw, bc)
    if comp_shape is not None and f.comp_shape != tuple(comp_shape):
        raise FieldError(f"sampled comp shape {f.comp_shape}, expected {tuple(comp_shape)}")
    return f


def _flatten_components(seq):
    for c in seq:
        if isinstance(c, (tuple, list)):
            yield from _flatten_components(c)
        else:
            yield c


def constant_field(grid: Grid, values, bc: str = FREE) -> Field:
    values = np.asarray(values, dtype=np.float64)
    data = np.broadcast_to(values.reshape(values.shape + (1,) * grid.dim),
                           values.shape + grid.shape).copy()
    return Field(grid, data, bc)


def zeros_like_role(grid: Grid, comp_shape: tuple[int, ...], bc: str) -> Field:
    return Field(grid, np.zeros(comp_shape + grid.shape), bc)


def project_to_sphere(m: Field, floor: float = 1e-8) -> Field:
    """Renormalize a 3-component field onto the unit sphere nodewise.

    Mirror-reflection compatibility survives: the nodal norm of a field
    with zero normal derivative also has zero normal derivative.
    """
    if m.comp_shape != (3,):
        raise FieldError("project_to_sphere expects a 3-component field")
    norm = np.sqrt(np.einsum("c...,c...->...", m.data, m.data))
    lo = norm.min()
    if lo < floor:
        raise ConstraintError(f"min |m| = {lo:.3e} below {floor:.0e}; constraint degenerate")
    return Field(m.grid, m.data / norm, m.bc)


def sphere_deviation(m: Field) -> float:
    """max over nodes of ||m| - 1|."""
    norm = np.sqrt(np.einsum("c...,c...->...", m.data, m.data))
    return float(np.abs(norm - 1.0).max())


def _check_pair(f: Field, g: Field):
    if f.grid != g.grid:
        raise FieldError("fields live on different grids")
    if f.comp_shape != g.comp_shape:
        raise FieldError(f"component shapes differ: {f.comp_shape} vs {g.comp_shape}")


def inner_product_L2(f: Field, g: Field) -> float:
    """Quadrature inner product, summed over components."""
    _check_pair(f, g)
    w = f.grid.quad_weights()
    prod = f.data * g.data
    comp_axes = tuple(range(prod.ndim - f.grid.dim))
    if comp_axes:
        prod = prod.sum(axis=comp_axes)
    return float(np.sum(prod * w))


def norm_L2(f: Field) -> float:
    return float(np.sqrt(max(inner_product_L2(f, f), 0.0)))


def norm_max(f: Field) -> float:
    return float(np.abs(f.data).max())


@dataclass
class State:
    """One time level of the coupled system: velocity u, deformation F,
    magnetization m (always 3 components), pressure pi."""

    t: float
    u: Field
    F: Field
    m: Field
    pi: Field

    def __post_init__(self):
        g = self.u.grid
        d = g.dim
        for name, fld, comp in (("u", self.u, (d,)), ("F", self.F, (d, d)),
                                ("m", self.m, (3,)), ("pi", self.pi, ())):
            if fld.grid != g:
                raise FieldError(f"{name} lives on a different grid")
            if fld.comp_shape != comp:
                raise FieldError(f"{name} has comp shape {fld.comp_shape}, expected {comp}")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.F.copy(), self.m.copy(), self.pi.copy())


def _role_tags(grid: Grid):
    if grid.periodic:
        return PERIODIC, PERIODIC, PERIODIC, PERIODIC
    return DIRICHLET, DIRICHLET, NEUMANN, NEUMANN


def make_state(grid: Grid, t=0.0, u_fn=None, F_fn=None, m_fn=None, pi_fn=None) -> State:
    """Assemble a State from per-field callables (zeros / e3 where omitted)."""
    d = grid.dim
    tu, tF, tm, tpi = _role_tags(grid)
    u = sample(grid, u_fn, tu, (d,)) if u_fn else zeros_like_role(grid, (d,), tu)
    F = sample(grid, F_fn, tF, (d, d)) if F_fn else zeros_like_role(grid, (d, d), tF)
    if m_fn:
        m = sample(grid, m_fn, tm, (3,))
    else:
        m = constant_field(grid, (0.0, 0.0, 1.0), tm)
    pi = sample(grid, pi_fn, tpi, ()) if pi_fn else zeros_like_role(grid, (), tpi)
    return State(t, u, F, m, pi)


def equilibrium_state(grid: Grid, m_star) -> State:
    """Rest state (u, F, pi) = 0 with constant unit magnetization."""
    m_star = np.asarray(m_star, dtype=np.float64)
    n = np.linalg.norm(m_star)
    if abs(n - 1.0) > 1e-12:
        raise FieldError(f"|m*| = {n} is not 1")
    st = make_state(grid)
    st.m.data[:] = m_star.reshape((3,) + (1,) * grid.dim)
    return st
