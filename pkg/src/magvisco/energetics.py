"""Energy, dissipation, and constraint accounting.

The Lyapunov functional of the constrained model is

    E = (|u|^2 + |F|^2 + |grad m|^2) / 2  integrated over the box,

and along smooth solutions dE/dt = -(D_u + D_F + D_m) with

    D_u = mu_s ||grad u||^2,  D_F = kappa ||grad F||^2,
    D_m = alpha ||lap m + |grad m|^2 m||^2.

D_m uses the tension-field form; the naive expansion
alpha(||lap m||^2 + |grad m|^2 (m . lap m)) is sign-indefinite off the
unit sphere, which ``unconstrained_m_dissipation`` exposes (that is the
caveat of dropping the constraint, relevant to the penalty variant).

The sphere-constraint defect phi = |m|^2 - 1 satisfies a forced heat
equation; ``constraint_report`` measures phi and its equation residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .fields import NEUMANN, PERIODIC, Field, State, inner_product_L2
from .params import Params


@dataclass
class EnergyRecord:
    t: float
    kinetic: float
    elastic: float
    exchange: float
    total: float
    diss_u: float
    diss_F: float
    diss_m: float
    dE_dt: float = float("nan")

    FIELDS = ("t", "kinetic", "elastic", "exchange", "total",
              "diss_u", "diss_F", "diss_m", "dE_dt")


def _half_norm2(f: Field) -> float:
    return 0.5 * inner_product_L2(f, f)


def energy_record(state: State, params: Params) -> EnergyRecord:
    """Energy split and instantaneous dissipation of one state."""
    kin = _half_norm2(state.u)
    ela = _half_norm2(state.F)
    gm = ops.gradient(state.m)
    exc = _half_norm2(gm)
    gu = ops.gradient(state.u)
    gF = ops.gradient(state.F)
    du = 2.0 * params.mu_s * _half_norm2(gu)
    dF = 2.0 * params.kappa * _half_norm2(gF)
    tension = tension_field(state.m)
    dm = 2.0 * params.alpha * _half_norm2(tension)
    return EnergyRecord(state.t, kin, ela, exc, kin + ela + exc, du, dF, dm)


def tension_field(m: Field) -> Field:
    """lap m + |grad m|^2 m, the constrained dissipation density root."""
    lap = ops.laplacian(m)
    gn2 = ops.grad_norm2(m)
    return Field(m.grid, lap.data + gn2.data * m.data, lap.bc)


def finalize_records(records: list[EnergyRecord]) -> list[EnergyRecord]:
    """Fill dE_dt by centered differences (one-sided at the ends)."""
    n = len(records)
    if n >= 2:
        for i in range(n):
            lo = max(i - 1, 0)
            hi = min(i + 1, n - 1)
            dt = records[hi].t - records[lo].t
            records[i].dE_dt = (records[hi].total - records[lo].total) / dt
    return records


@dataclass
class BalanceReport:
    t: np.ndarray
    dE_dt: np.ndarray
    dissipation: np.ndarray
    rel_mismatch: np.ndarray
    max_rel_mismatch: float
    monotone: bool


def dissipation_balance(records: list[EnergyRecord], skip: int = 10) -> BalanceReport:
    """Compare centered dE/dt against -(D_u + D_F + D_m) recordwise.

    The first ``skip`` records (splitting startup) and the two endpoint
    one-sided estimates are excluded from the mismatch statistic.
    """
    if len(records) < 3:
        raise ValueError("dissipation balance needs at least 3 records")
    records = finalize_records(records)
    t = np.array([r.t for r in records])
    e = np.array([r.total for r in records])
    d = np.array([r.diss_u + r.diss_F + r.diss_m for r in records])
    dedt = np.array([r.dE_dt for r in records])
    lo = max(skip, 1)
    hi = len(records) - 1
    window = slice(lo, hi)
    denom = np.maximum(d[window], 1e-14)
    rel = np.abs(dedt[window] + d[window]) / denom
    monotone = bool(np.all(np.diff(e) <= 1e-12 * max(e[0], 1.0)))
    return BalanceReport(t[window], dedt[window], d[window], rel,
                         float(rel.max()) if rel.size else 0.0, monotone)


def unconstrained_m_dissipation(state: State, params: Params) -> tuple[float, float]:
    """(alpha ||lap m||^2, alpha Int |grad m|^2 (m . lap m)): the two pieces
    of the naive m-dissipation; the second is sign-indefinite in general
    and equals -alpha Int |grad m|^4 on the unit sphere."""
    lap = ops.laplacian(state.m)
    a = 2.0 * params.alpha * _half_norm2(lap)
    gn2 = ops.grad_norm2(state.m)
    mlap = np.einsum("c...,c...->...", state.m.data, lap.data)
    w = state.grid.quad_weights()
    b = params.alpha * float(np.sum(w * gn2.data * mlap))
    return a, b


def sign_indefinite_term(m: Field) -> float:
    """Int |grad m|^2 (m . lap m) for a bare magnetization field."""
    lap = ops.laplacian(m)
    gn2 = ops.grad_norm2(m)
    mlap = np.einsum("c...,c...->...", m.data, lap.data)
    w = m.grid.quad_weights()
    return float(np.sum(w * gn2.data * mlap))


@dataclass
class ConstraintReport:
    max_dev: float       # max nodal ||m|^2 - 1|
    l2_dev: float
    residual_max: float  # defect-equation residual, backward-difference form
    residual_l2: float


def constraint_field(m: Field) -> Field:
    phi = np.einsum("c...,c...->...", m.data, m.data) - 1.0
    bc = PERIODIC if m.grid.periodic else NEUMANN
    return Field(m.grid, phi, bc)


def constraint_report(prev: State, new: State, params: Params, dt: float) -> ConstraintReport:
    """Evaluate the defect phi = |m|^2 - 1 and the residual of its heat
    equation  d_t phi + u . grad phi - alpha lap phi - 2 alpha |grad m|^2 phi = 0
    with the time derivative backward-differenced and space at the new level."""
    phi_old = constraint_field(prev.m)
    phi_new = constraint_field(new.m)
    dphi = (phi_new.data - phi_old.data) / dt
    adv = ops.advect(new.u, phi_new).data
    lap = ops.laplacian(phi_new).data
    gn2 = ops.grad_norm2(new.m).data
    resid = dphi + adv - params.alpha * lap - 2.0 * params.alpha * gn2 * phi_new.data
    w = new.grid.quad_weights()
    return ConstraintReport(
        max_dev=float(np.abs(phi_new.data).max()),
        l2_dev=float(np.sqrt(np.sum(w * phi_new.data ** 2))),
        residual_max=float(np.abs(resid).max()),
        residual_l2=float(np.sqrt(np.sum(w * resid ** 2))),
    )
