"""Semi-implicit time stepping for the coupled flow.

Each step advances the fields in a fixed triangular order so the
velocity sees the freshly updated stresses:

1.  deformation: advection and velocity stretching explicit, the
    diffusive part ``kappa lap F`` implicit (CG, pinned Laplacian);
2.  magnetization: transport and the cubic term ``alpha |grad m|^2 m``
    explicit, the stiff ``(alpha I - beta M(m)) lap m`` implicit with
    the cross matrix frozen at a known direction field (BiCGStab: the
    frozen operator is not symmetric);
3.  velocity predictor: advection explicit, the magnetization and
    elastic stress divergences evaluated at the *new* F and m,
    viscosity implicit (CG);
4.  pressure projection of the predictor; the projection potential
    scaled by the time-derivative coefficient becomes the pressure.

Two schemes share this skeleton: first-order IMEX Euler, and SBDF2
(second-order backward differences with explicitly extrapolated
nonlinearities, frozen direction ``2 m^n - m^{n-1}``).  SBDF2 assumes a
fixed dt and bootstraps with one Euler step.

All implicit systems are solved for the increment relative to the
previous level, so constant-in-time states pass through the solvers
exactly (zero right-hand side short-circuits) instead of accumulating
solver-tolerance noise.

On boxes the right-hand sides of the pinned solves are zeroed on the
boundary, which keeps every Krylov iterate in the zero-trace subspace;
the corrected velocity is re-zeroed after projection because the
discrete gradient of the potential may leak tangentially into the
boundary ring (its normal trace vanishes by construction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from . import operators as ops
from .energetics import EnergyRecord, energy_record
from .fields import Field, State, norm_max, project_to_sphere, sphere_deviation
from .grid import Grid
from .leray import helmholtz_project, interior_divergence_max
from .linsolve import LinearSolveError, bicgstab, cg
from .params import Params

SCHEMES = ("imex-euler", "imex-bdf2")
CONSTRAINT_MODES = ("projected", "monitored")


class IntegrationError(RuntimeError):
    """A step failed: solver breakdown or a diverging field."""


@dataclass
class StepStats:
    step: int
    t: float
    iters_F: int
    iters_m: int
    iters_u: int
    iters_proj: int
    div_after: float
    sphere_dev: float


@dataclass
class Trajectory:
    scheme: str
    dt: float
    params: Params
    times: list = dc_field(default_factory=list)
    states: list = dc_field(default_factory=list)   # strided snapshots
    records: list = dc_field(default_factory=list)  # EnergyRecord per step
    stats: list = dc_field(default_factory=list)

    @property
    def final(self) -> State:
        return self.states[-1]


def cfl_dt(u: Field, dt_max: float = 1e-3, c_cfl: float = 0.4) -> float:
    """Advective step bound min(dt_max, c h / |u|_inf)."""
    speed = norm_max(u)
    h = min(u.grid.spacing)
    if speed <= 1e-14:
        return dt_max
    return min(dt_max, c_cfl * h / speed)


# ---------------------------------------------------------------------------
# implicit operators (raw arrays; Field wrappers stay out of the hot loop)


def _zero_boundary(grid: Grid, arr: np.ndarray) -> np.ndarray:
    if not grid.periodic:
        arr[..., grid.boundary_mask()] = 0.0
    return arr


def _heat_apply(grid: Grid, coef: float, code: int, ncomp: int):
    """x -> x - coef * lap x, componentwise, on flat vectors."""
    hinv2 = grid.hinv2
    shape = (ncomp,) + grid.shape

    def apply(xf):
        x = xf.reshape(shape)
        out = np.empty_like(x)
        for k in range(ncomp):
            out[k] = x[k] - coef * kernels.lap(x[k], hinv2, code)
        return out.reshape(-1)

    return apply


def _frozen_llg_apply(grid: Grid, coef: float, alpha: float, beta: float,
                      cdir: np.ndarray, code: int):
    """x -> x - coef (alpha lap x - beta cdir x lap x) on flat vectors."""
    hinv2 = grid.hinv2
    shape = (3,) + grid.shape

    def apply(xf):
        x = xf.reshape(shape)
        lap = np.empty_like(x)
        for k in range(3):
            lap[k] = kernels.lap(x[k], hinv2, code)
        rot = np.cross(cdir, lap, axis=0)
        return (x - coef * (alpha * lap - beta * rot)).reshape(-1)

    return apply


def _solve_increment(apply_A, rhs, guess, solver, tol, maxiter):
    """Solve A x = rhs starting from guess, iterating on the correction."""
    g = guess.reshape(-1)
    r = rhs.reshape(-1) - apply_A(g)
    y, info = solver(apply_A, r, tol=tol, maxiter=maxiter)
    return (g + y).reshape(rhs.shape), info


# ---------------------------------------------------------------------------
# explicit right-hand-side pieces


def _explicit_F(u: Field, F: Field) -> np.ndarray:
    """Stretching (grad u)^T F minus transport; diffusion handled implicitly."""
    Gu = ops.gradient(u).data
    stretch = np.einsum("ki...,kj...->ij...", Gu, F.data)
    return stretch - ops.advect(u, F).data


def _explicit_m(u: Field | None, m: Field, alpha: float) -> np.ndarray:
    out = alpha * ops.grad_norm2(m).data * m.data
    if u is not None:
        out = out - ops.advect(u, m).data
    return out


def _advection_u(u: Field) -> np.ndarray:
    return -ops.advect(u, u).data


def _stress_div(F: Field, m: Field) -> np.ndarray:
    return ops.elastic_stress_div(F).data - ops.magnetic_stress_div(m).data


@dataclass
class _History:
    """Previous level and its explicit terms, for the BDF2 extrapolation."""
    state: State
    expl_F: np.ndarray
    expl_m: np.ndarray
    adv_u: np.ndarray


# ---------------------------------------------------------------------------
# one step


def _step(state: State, params: Params, dt: float, hist: _History | None,
          constraint: str, tol: float, maxiter: int | None):
    g = state.grid
    pin = kernels.L_PERIODIC if g.periodic else kernels.L_PIN
    refl = kernels.L_PERIODIC if g.periodic else kernels.L_REFLECT
    bdf = hist is not None
    c = (2.0 / 3.0) * dt if bdf else dt

    expl_F = _explicit_F(state.u, state.F)
    expl_m = _explicit_m(state.u, state.m, params.alpha)
    adv_u = _advection_u(state.u)

    if bdf:
        # difference form of (4 x^n - x^{n-1}) / 3: exact when the state is
        # constant in time, so equilibria survive BDF2 bitwise too
        base_F = state.F.data + (state.F.data - hist.state.F.data) / 3.0
        base_m = state.m.data + (state.m.data - hist.state.m.data) / 3.0
        base_u = state.u.data + (state.u.data - hist.state.u.data) / 3.0
        eff_F = 2.0 * expl_F - hist.expl_F
        eff_m = 2.0 * expl_m - hist.expl_m
        eff_adv = 2.0 * adv_u - hist.adv_u
        cdir = 2.0 * state.m.data - hist.state.m.data
    else:
        base_F, base_m, base_u = state.F.data, state.m.data, state.u.data
        eff_F, eff_m, eff_adv = expl_F, expl_m, adv_u
        cdir = state.m.data

    # deformation
    rhs_F = _zero_boundary(g, base_F + c * eff_F)
    d = g.dim
    F_data, info_F = _solve_increment(
        _heat_apply(g, c * params.kappa, pin, d * d),
        rhs_F, state.F.data, cg, tol, maxiter)
    F_new = Field(g, _zero_boundary(g, F_data), state.F.bc)

    # magnetization
    rhs_m = base_m + c * eff_m
    m_data, info_m = _solve_increment(
        _frozen_llg_apply(g, c, params.alpha, params.beta, cdir, refl),
        rhs_m, state.m.data, bicgstab, tol, maxiter)
    m_new = Field(g, m_data, state.m.bc)
    if constraint == "projected":
        m_new = project_to_sphere(m_new)
    dev = sphere_deviation(m_new)  # post-projection: the state that leaves the step

    # velocity predictor: stresses at the new level
    rhs_u = _zero_boundary(g, base_u + c * (eff_adv + _stress_div(F_new, m_new)))
    u_data, info_u = _solve_increment(
        _heat_apply(g, c * params.mu_s, pin, d),
        rhs_u, state.u.data, cg, tol, maxiter)
    u_star = Field(g, _zero_boundary(g, u_data), state.u.bc)

    # projection; the potential over the BDF time coefficient is the pressure
    res = helmholtz_project(u_star, tol=tol, maxiter=maxiter)
    u_new = Field(g, _zero_boundary(g, res.v_sigma.data), state.u.bc)
    pi_new = Field(g, res.psi.data / c, state.pi.bc)

    new = State(state.t + dt, u_new, F_new, m_new, pi_new)
    stats = StepStats(0, new.t, info_F.iterations, info_m.iterations,
                      info_u.iterations, res.iterations,
                      interior_divergence_max(u_new), dev)
    new_hist = _History(state, expl_F, expl_m, adv_u)
    return new, stats, new_hist


def _check_alive(state: State, cap: float, step: int):
    for name, fld in (("u", state.u), ("F", state.F), ("m", state.m)):
        top = norm_max(fld)
        if not math.isfinite(top) or top > cap:
            raise IntegrationError(
                f"step {step} (t = {state.t:.6g}): |{name}|_inf = {top:.3e} "
                f"exceeds the blow-up cap {cap:.3e}")


def run(state0: State, params: Params, t_end: float = 5.0, dt: float | None = None,
        scheme: str = "imex-bdf2", constraint: str = "projected",
        dt_max: float = 1e-3, c_cfl: float = 0.4, tol: float = 1e-10,
        maxiter: int | None = None, save_every: int = 0,
        blowup_cap: float = 1e8, callback=None) -> Trajectory:
    """Integrate from state0 to t_end with a fixed step.

    dt defaults to the CFL bound of the initial velocity, then shrinks so
    an integer number of steps lands exactly on t_end.  ``save_every = k``
    keeps every k-th state (first and last always); 0 keeps only those two.
    Energy is recorded every step.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; pick from {SCHEMES}")
    if constraint not in CONSTRAINT_MODES:
        raise ValueError(f"unknown constraint mode {constraint!r}")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if dt is None:
        dt = cfl_dt(state0.u, dt_max, c_cfl)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n_steps

    traj = Trajectory(scheme, dt, params)
    traj.times.append(state0.t)
    traj.states.append(state0.copy())
    traj.records.append(energy_record(state0, params))

    state = state0.copy()
    hist = None
    for k in range(1, n_steps + 1):
        use_hist = hist if scheme == "imex-bdf2" else None
        try:
            state, stats, hist = _step(state, params, dt, use_hist,
                                       constraint, tol, maxiter)
        except LinearSolveError as err:
            raise IntegrationError(
                f"step {k} (t = {state.t + dt:.6g}): implicit solve failed "
                f"after {err.iterations} iterations (residual {err.residual:.3e})"
            ) from err
        _check_alive(state, blowup_cap, k)
        stats.step = k
        traj.times.append(state.t)
        traj.records.append(energy_record(state, params))
        traj.stats.append(stats)
        if (save_every and k % save_every == 0) or k == n_steps:
            traj.states.append(state.copy())
        if callback is not None:
            callback(k, state, stats)
    return traj


# ---------------------------------------------------------------------------
# standalone magnetization flow (zero velocity, no back-coupling)


@dataclass
class LLGTrajectory:
    dt: float
    times: list = dc_field(default_factory=list)
    fields: list = dc_field(default_factory=list)
    exchange: list = dc_field(default_factory=list)
    deviation: list = dc_field(default_factory=list)

    @property
    def final(self) -> Field:
        return self.fields[-1]


def run_llg(m0: Field, params: Params, t_end: float, dt: float,
            scheme: str = "imex-euler", constraint: str = "projected",
            tol: float = 1e-10, maxiter: int | None = None,
            save_every: int = 1) -> LLGTrajectory:
    """Evolve the magnetization alone (the harmonic map flow component)."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; pick from {SCHEMES}")
    g = m0.grid
    refl = kernels.L_PERIODIC if g.periodic else kernels.L_REFLECT
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n_steps

    traj = LLGTrajectory(dt)
    w = g.quad_weights()

    def record(t, m):
        traj.times.append(t)
        traj.fields.append(m.copy())
        gm = ops.gradient(m).data
        traj.exchange.append(0.5 * float(np.sum(
            w * np.einsum("ac...,ac...->...", gm, gm))))
        traj.deviation.append(sphere_deviation(m))

    record(0.0, m0)
    m = m0.copy()
    prev = None  # (m, expl) for BDF2
    for k in range(1, n_steps + 1):
        expl = _explicit_m(None, m, params.alpha)
        if scheme == "imex-bdf2" and prev is not None:
            c = (2.0 / 3.0) * dt
            rhs = m.data + (m.data - prev[0].data) / 3.0 \
                + c * (2.0 * expl - prev[1])
            cdir = 2.0 * m.data - prev[0].data
        else:
            c = dt
            rhs = m.data + c * expl
            cdir = m.data
        try:
            new_data, _ = _solve_increment(
                _frozen_llg_apply(g, c, params.alpha, params.beta, cdir, refl),
                rhs, m.data, bicgstab, tol, maxiter)
        except LinearSolveError as err:
            raise IntegrationError(
                f"step {k} (t = {k * dt:.6g}): magnetization solve failed") from err
        prev = (m, expl)
        m = Field(g, new_data, m0.bc)
        if constraint == "projected":
            m = project_to_sphere(m)
        if k % save_every == 0 or k == n_steps:
            record(k * dt, m)
    return traj
