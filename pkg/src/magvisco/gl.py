"""Penalized variant: the unit-sphere constraint replaced by a stiff well.

The magnetization equation becomes

    d_t m + u . grad m = lap m - (1/eps^2)(|m|^2 - 1) m

(no damping/precession split here — the penalized model carries a plain
Laplacian), while the velocity and deformation equations are unchanged.
With u = 0, F = 0 this is the gradient flow of the energy

    E_eps = 1/2 Int |grad m|^2 + 1/(4 eps^2) Int (|m|^2 - 1)^2 ,

which the discrete right-hand side reproduces exactly in the compatible
form: with A = -W lap (symmetric) and quadrature weights w,

    W gl_rhs(m)|_{u=0} = -grad_m [ 1/2 sum_c m_c^T A m_c
                                   + 1/(4 eps^2) sum_i w_i (|m_i|^2-1)^2 ].

``gl_gradient_check`` verifies that identity by finite differences.

The penalty is integrated semi-implicitly, linear in the new iterate:
-(1/eps^2)(|m^n|^2 - 1) m^{n+1}.  That removes the stiffest explicit
restriction but the frozen coefficient can be transiently negative, so
steps keep dt <= c_pen * eps^2 (default c_pen = 0.5), which bounds the
frozen diagonal away from destroying invertibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from . import operators as ops
from .energetics import constraint_field
from .fields import Field, State, norm_L2, sphere_deviation
from .grid import Grid
from .integrator import (IntegrationError, _explicit_F, _heat_apply,
                         _solve_increment, _stress_div, _zero_boundary,
                         cfl_dt, _check_alive)
from .leray import helmholtz_project
from .linsolve import LinearSolveError, bicgstab, cg
from .params import Params

C_PEN = 0.5  # dt <= C_PEN * eps^2


@dataclass
class GLRecord:
    t: float
    kinetic: float
    elastic: float
    exchange: float
    penalty: float
    total: float


@dataclass
class GLTrajectory:
    epsilon: float
    dt: float
    params: Params
    times: list = dc_field(default_factory=list)
    states: list = dc_field(default_factory=list)      # strided snapshots
    records: list = dc_field(default_factory=list)     # GLRecord per step
    constraint: list = dc_field(default_factory=list)  # max ||m| - 1| per step

    @property
    def final(self) -> State:
        return self.states[-1]


def gl_rhs(m: Field, u: Field | None, epsilon: float) -> Field:
    """lap m - (1/eps^2)(|m|^2 - 1) m - (u . grad) m, nodewise."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    phi = constraint_field(m).data
    out = ops.laplacian(m).data - (phi / epsilon ** 2) * m.data
    if u is not None:
        out = out - ops.advect(u, m).data
    return Field(m.grid, out, m.bc)


def gl_energy(state: State, params: Params, epsilon: float) -> GLRecord:
    w = state.grid.quad_weights()
    kin = 0.5 * norm_L2(state.u) ** 2
    ela = 0.5 * norm_L2(state.F) ** 2
    gm = ops.gradient(state.m).data
    exc = 0.5 * float(np.sum(w * np.einsum("ac...,ac...->...", gm, gm)))
    phi = constraint_field(state.m).data
    pen = float(np.sum(w * phi ** 2)) / (4.0 * epsilon ** 2)
    return GLRecord(state.t, kin, ela, exc, pen, kin + ela + exc + pen)


def _penalized_apply(grid: Grid, coef: float, pen_coef: np.ndarray, code: int):
    """x -> x - coef lap x + pen_coef x componentwise, on flat vectors.

    pen_coef = (coef/eps^2)(|m^n|^2 - 1) nodally, shared by the three
    components; it can dip negative, which the dt cap keeps harmless.
    """
    hinv2 = grid.hinv2
    shape = (3,) + grid.shape

    def apply(xf):
        x = xf.reshape(shape)
        out = np.empty_like(x)
        for k in range(3):
            out[k] = x[k] - coef * kernels.lap(x[k], hinv2, code) + pen_coef * x[k]
        return out.reshape(-1)

    return apply


def run_gl(state0: State, params: Params, epsilon: float, t_end: float,
           dt: float | None = None, dt_max: float = 1e-3, c_cfl: float = 0.4,
           tol: float = 1e-10, maxiter: int | None = None, save_every: int = 0,
           blowup_cap: float = 1e8, callback=None) -> GLTrajectory:
    """First-order IMEX integration of the penalized system.

    An explicit dt above the penalty cap C_PEN * eps^2 is an error; an
    automatic dt is clipped to it.  No unit-norm requirement on m0.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    cap = C_PEN * epsilon ** 2
    if dt is None:
        dt = min(cfl_dt(state0.u, dt_max, c_cfl), cap)
    elif dt > cap:
        raise ValueError(
            f"dt = {dt:g} exceeds the penalty stability cap {cap:g} "
            f"(= {C_PEN} * eps^2)")
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n_steps

    g = state0.grid
    d = g.dim
    pin = kernels.L_PERIODIC if g.periodic else kernels.L_PIN
    refl = kernels.L_PERIODIC if g.periodic else kernels.L_REFLECT

    traj = GLTrajectory(epsilon, dt, params)
    traj.times.append(state0.t)
    traj.states.append(state0.copy())
    traj.records.append(gl_energy(state0, params, epsilon))
    traj.constraint.append(sphere_deviation(state0.m))

    state = state0.copy()
    for k in range(1, n_steps + 1):
        try:
            # deformation: as in the constrained scheme
            rhs_F = _zero_boundary(g, state.F.data + dt * _explicit_F(state.u, state.F))
            F_data, _ = _solve_increment(
                _heat_apply(g, dt * params.kappa, pin, d * d),
                rhs_F, state.F.data, cg, tol, maxiter)
            F_new = Field(g, _zero_boundary(g, F_data), state.F.bc)

            # magnetization: transport explicit, Laplacian + frozen penalty implicit
            rhs_m = state.m.data - dt * ops.advect(state.u, state.m).data
            pen = (dt / epsilon ** 2) * constraint_field(state.m).data
            m_data, _ = _solve_increment(
                _penalized_apply(g, dt, pen, refl),
                rhs_m, state.m.data, bicgstab, tol, maxiter)
            m_new = Field(g, m_data, state.m.bc)

            # velocity predictor and projection, stresses at the new level
            rhs_u = _zero_boundary(
                g, state.u.data + dt * (-ops.advect(state.u, state.u).data
                                        + _stress_div(F_new, m_new)))
            u_data, _ = _solve_increment(
                _heat_apply(g, dt * params.mu_s, pin, d),
                rhs_u, state.u.data, cg, tol, maxiter)
            u_star = Field(g, _zero_boundary(g, u_data), state.u.bc)
            res = helmholtz_project(u_star, tol=tol, maxiter=maxiter)
            u_new = Field(g, _zero_boundary(g, res.v_sigma.data), state.u.bc)
            pi_new = Field(g, res.psi.data / dt, state.pi.bc)
        except LinearSolveError as err:
            raise IntegrationError(
                f"step {k} (t = {state.t + dt:.6g}): implicit solve failed "
                f"after {err.iterations} iterations (residual {err.residual:.3e})"
            ) from err

        state = State(state.t + dt, u_new, F_new, m_new, pi_new)
        _check_alive(state, blowup_cap, k)
        traj.times.append(state.t)
        traj.records.append(gl_energy(state, params, epsilon))
        traj.constraint.append(sphere_deviation(state.m))
        if (save_every and k % save_every == 0) or k == n_steps:
            traj.states.append(state.copy())
        if callback is not None:
            callback(k, state)
    return traj


# ---------------------------------------------------------------------------
# variational-consistency and comparison diagnostics


def discrete_gl_energy(m: Field, epsilon: float) -> float:
    """The compatible quadratic+quartic form whose exact nodal gradient
    is -W gl_rhs (edge-consistent exchange via A = -W lap)."""
    from . import sparseops
    A, _ = sparseops.compact_neumann_system(m.grid)
    w = m.grid.quad_weights().reshape(-1)
    exch = 0.0
    for comp in m.data.reshape((3, -1)):
        exch += 0.5 * float(comp @ (A @ comp))
    phi = constraint_field(m).data.reshape(-1)
    return exch + float(np.sum(w * phi ** 2)) / (4.0 * epsilon ** 2)


def gl_gradient_check(m: Field, epsilon: float, delta: float = 1e-6,
                      seed: int = 0, n_dirs: int = 3) -> float:
    """Max relative mismatch between centered differences of the discrete
    energy and the directional derivative <-W gl_rhs, v> over random v."""
    g = m.grid
    w = g.quad_weights()
    rng = np.random.default_rng(seed)
    grad = -(w * gl_rhs(m, None, epsilon).data)  # includes the W factor
    worst = 0.0
    for _ in range(n_dirs):
        v = rng.normal(size=m.data.shape)
        v /= np.abs(v).max()
        mp = Field(g, m.data + delta * v, m.bc)
        mm = Field(g, m.data - delta * v, m.bc)
        fd = (discrete_gl_energy(mp, epsilon) - discrete_gl_energy(mm, epsilon)) / (2 * delta)
        an = float(np.sum(grad * v))
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-14))
    return worst


@dataclass
class DeviationReport:
    epsilon: float
    times: np.ndarray
    l2_dev: np.ndarray           # ||m_eps - m||_2 at shared snapshot times
    linf_constraint: np.ndarray  # max ||m_eps| - 1|


def compare_constrained(gl_traj: GLTrajectory, ref_traj) -> DeviationReport:
    """Deviation of a penalized run from a constrained reference run with
    the same grid, initial data, and snapshot cadence."""
    t_gl = np.array([s.t for s in gl_traj.states])
    t_ref = np.array([s.t for s in ref_traj.states])
    if t_gl.shape != t_ref.shape or not np.allclose(t_gl, t_ref, atol=1e-12):
        raise ValueError("snapshot cadences differ; rerun with matching save_every")
    l2 = np.empty(t_gl.size)
    linf = np.empty(t_gl.size)
    for i, (a, b) in enumerate(zip(gl_traj.states, ref_traj.states)):
        diff = Field(a.grid, a.m.data - b.m.data, a.m.bc)
        l2[i] = norm_L2(diff)
        linf[i] = sphere_deviation(a.m)
    return DeviationReport(gl_traj.epsilon, t_gl, l2, linf)


def epsilon_sweep(state0: State, params: Params, epsilons, t_end: float,
                  dt: float | None = None, **kw) -> list[GLTrajectory]:
    """Run the penalized system for each epsilon (given large to small)."""
    eps = list(epsilons)
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilon sweep must be strictly decreasing")
    return [run_gl(state0, params, e, t_end, dt=dt, **kw) for e in eps]
