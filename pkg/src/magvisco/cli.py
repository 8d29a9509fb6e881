"""Command-line surface.

Subcommands: run, identities, spectrum, decay, gl-compare, info.
Exit codes: 0 all checks passed, 1 a numerical check failed,
2 usage or configuration error.  Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .config import ConfigError, load_config
from .energetics import dissipation_balance, finalize_records
from .fields import FREE, NEUMANN, Field, State, make_state, project_to_sphere, sample
from .gl import compare_constrained, run_gl
from .grid import Grid, GridError, make_grid
from .integrator import IntegrationError, run
from .linsolve import LinearSolveError
from .operators import (
    cross_matrix, divergence, divergence_matrix, double_cross, elastic_stress,
    grad_norm2, gradient, laplacian, magnetic_stress_div, nodal_matvec,
    stress_div_direct, stress_div_gradform,
)
from .output import (
    ensure_dir, write_deviation_csv, write_energy_csv, write_gl_energy_csv,
    write_manifest,
)
from .params import Params
from .snapshots import SnapshotError, read_snapshot, write_snapshot
from .stability import (
    StabilityError, assemble_linearization, detect_equilibrium, fit_decay_rate,
    semisimplicity_check, spectrum,
)

# deterministic coefficient block for the built-in initial states
_K_COEF = (1.0, 0.5, -0.3, 0.8, 0.4, -0.6, 0.2, 0.9, -0.5)


# ---------------------------------------------------------------------------
# built-in initial states


def _stream_velocity(grid: Grid):
    """Divergence-free velocity vanishing on the box boundary (or plainly
    periodic), from a stream function / vector potential."""
    if grid.periodic:
        if grid.dim == 2:
            return lambda x, y: [np.sin(2 * np.pi * y), np.sin(2 * np.pi * x)]
        return lambda x, y, z: [np.sin(2 * np.pi * y), np.sin(2 * np.pi * z),
                                np.sin(2 * np.pi * x)]
    pi = np.pi
    if grid.dim == 2:
        def fn(x, y):
            sx, sy = np.sin(pi * x), np.sin(pi * y)
            return [2 * pi * sx ** 2 * sy * np.cos(pi * y),
                    -2 * pi * sx * np.cos(pi * x) * sy ** 2]
        return fn

    def fn(x, y, z):
        sx, sy, sz = np.sin(pi * x), np.sin(pi * y), np.sin(pi * z)
        bump_z = sz ** 2
        return [2 * pi * sx ** 2 * sy * np.cos(pi * y) * bump_z,
                -2 * pi * sx * np.cos(pi * x) * sy ** 2 * bump_z,
                np.zeros_like(x)]
    return fn


def _bump(grid: Grid):
    if grid.periodic:
        if grid.dim == 2:
            return lambda x, y: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
        return lambda x, y, z: (np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
                                * np.cos(2 * np.pi * z))
    if grid.dim == 2:
        return lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    return lambda x, y, z: (np.sin(np.pi * x) * np.sin(np.pi * y)
                            * np.sin(np.pi * z))


def _tilt_angles(grid: Grid):
    """Two smooth scalar fields compatible with the magnetization closure
    (zero normal derivative on boxes, plainly periodic otherwise)."""
    if grid.periodic:
        if grid.dim == 2:
            return (lambda x, y: np.cos(2 * np.pi * x) + 0.5 * np.sin(2 * np.pi * y),
                    lambda x, y: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))
        return (lambda x, y, z: np.cos(2 * np.pi * x) + 0.5 * np.sin(2 * np.pi * y)
                + 0.25 * np.cos(2 * np.pi * z),
                lambda x, y, z: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * z))
    pi = np.pi
    if grid.dim == 2:
        return (lambda x, y: np.cos(pi * x) * np.cos(pi * y),
                lambda x, y: np.cos(2 * pi * x) * np.cos(pi * y))
    return (lambda x, y, z: np.cos(pi * x) * np.cos(pi * y) * np.cos(pi * z),
            lambda x, y, z: np.cos(2 * pi * x) * np.cos(pi * y) * np.cos(pi * z))


def benchmark_state(grid: Grid, amplitude: float = 1.0) -> State:
    """Smooth, boundary-compatible initial data with all three fields
    active: stream-function velocity, boundary-vanishing deformation,
    unit magnetization tilted away from e3 by `amplitude` radians."""
    d = grid.dim
    K = np.array(_K_COEF[:d * d]).reshape(d, d)
    u_base = _stream_velocity(grid)
    bump = _bump(grid)
    theta_fn, phi_fn = _tilt_angles(grid)

    def u_fn(*xs):
        return [amplitude * c for c in u_base(*xs)]

    def F_fn(*xs):
        b = amplitude * bump(*xs)
        return [[b * K[i, j] for j in range(d)] for i in range(d)]

    def m_fn(*xs):
        th = amplitude * theta_fn(*xs)
        ph = phi_fn(*xs)
        return [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]

    return make_state(grid, u_fn=u_fn, F_fn=F_fn, m_fn=m_fn)


def perturbed_equilibrium(grid: Grid, m_star=(0.0, 0.0, 1.0),
                          amplitude: float = 1e-2) -> State:
    """Rest state (0, 0, m*) nudged in all three fields by `amplitude`."""
    st = benchmark_state(grid, amplitude)
    m_star = np.asarray(m_star, dtype=np.float64)
    n = np.linalg.norm(m_star)
    if n < 1e-12:
        raise ValueError("m_star must be a nonzero vector")
    m_star = m_star / n
    # rotate the e3-centred tilt so it surrounds m* instead
    if abs(m_star[2] - 1.0) > 1e-14:
        e3 = np.array([0.0, 0.0, 1.0])
        v = np.cross(e3, m_star)
        c = float(m_star[2])
        Vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
        if 1.0 + c < 1e-14:  # antipodal: flip around e1
            R = np.diag([1.0, -1.0, -1.0])
        else:
            R = np.eye(3) + Vx + Vx @ Vx / (1.0 + c)
        st.m.data[:] = np.einsum("ab,b...->a...", R, st.m.data)
        st.m = project_to_sphere(st.m)
    return st


def _initial_state(cfg, grid: Grid) -> State:
    if cfg.initial == "benchmark":
        return benchmark_state(grid, cfg.amplitude)
    if cfg.initial == "equilibrium":
        return perturbed_equilibrium(grid, amplitude=cfg.amplitude)
    state, _, _ = read_snapshot(cfg.initial)
    if state.grid.extents != grid.extents or state.grid.periodic != grid.periodic:
        raise ConfigError(
            f"snapshot grid {state.grid.extents} does not match config "
            f"grid {grid.extents}")
    return state


# ---------------------------------------------------------------------------
# identity suite


def _smooth_scalar(rng):
    a = rng.uniform(0.3, 1.0, size=2)
    p = rng.uniform(0.0, 2.0 * np.pi, size=4)

    def fn(x, y):
        return (a[0] * np.sin(np.pi * x + p[0]) * np.cos(np.pi * y + p[1])
                + a[1] * np.cos(2 * np.pi * x + p[2]) * np.sin(2 * np.pi * y + p[3]))
    return fn


def _smooth_compat_scalar(rng):
    """Random cosine series with zero normal derivative on the unit box,
    so the reflecting Laplacian closure stays second order."""
    a = rng.uniform(-0.7, 0.7, size=(3, 3))
    a[0, 0] = 0.0

    def fn(x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for i in range(3):
            for j in range(3):
                if a[i, j]:
                    out = out + a[i, j] * np.cos(i * np.pi * x) * np.cos(j * np.pi * y)
        return out
    return fn


IDENTITY_NAMES = (
    "matrix product rule",     # (div A).u = div(Au) - A:grad u
    "double cross vs tension",  # m x (m x lap m) = -(lap m + |grad m|^2 m)
    "stress formula vs direct assembly",
    "stress direct vs gradient form",
)

NODAL_NAMES = ("M skew part", "M(m) m", "stretch:F vs FF^T:grad u")


def identity_suite(sizes=(32, 64, 128), seed=0):
    """Residuals of the four O(h^2) operator identities under refinement,
    plus the exact nodal identities on the finest grid.

    Returns {"sizes", "residuals": {name: [..]}, "orders": {name: [..]},
    "nodal": {name: value}}.  The same continuum test fields (drawn once
    from `seed`) are sampled on every grid.
    """
    sizes = tuple(sizes)
    if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("need at least two strictly increasing grid sizes")
    rng = np.random.default_rng(seed)
    d = 2
    A_fns = [[_smooth_scalar(rng) for _ in range(d)] for _ in range(d)]
    u_fns = [_smooth_scalar(rng) for _ in range(d)]
    m3_fns = [_smooth_compat_scalar(rng) for _ in range(3)]
    th_fn, ph_fn = _smooth_compat_scalar(rng), _smooth_compat_scalar(rng)
    F_fns = [[_smooth_scalar(rng) for _ in range(d)] for _ in range(d)]

    residuals = {name: [] for name in IDENTITY_NAMES}
    nodal = {}
    for n in sizes:
        g = make_grid(d, (n, n))
        A = sample(g, lambda x, y: [[f(x, y) for f in row] for row in A_fns],
                   FREE, (d, d))
        u = sample(g, lambda x, y: [f(x, y) for f in u_fns], FREE, (d,))
        m3 = sample(g, lambda x, y: [f(x, y) for f in m3_fns], NEUMANN, (3,))

        def munit_fn(x, y):
            th, ph = th_fn(x, y), ph_fn(x, y)
            return [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
        mu = sample(g, munit_fn, NEUMANN, (3,))

        Gu = gradient(u).data  # [j, i] = d_j u_i
        lhs = np.einsum("i...,i...->...", divergence_matrix(A).data, u.data)
        w = np.einsum("ji...,i...->j...", A.data, u.data)  # (A u)_j = A_ji u_i
        rhs = divergence(Field(g, w, FREE)).data \
            - np.einsum("ab...,ab...->...", A.data, Gu)
        residuals[IDENTITY_NAMES[0]].append(float(np.max(np.abs(lhs - rhs))))

        res22 = double_cross(mu).data + laplacian(mu).data \
            + grad_norm2(mu).data * mu.data
        residuals[IDENTITY_NAMES[1]].append(float(np.max(np.abs(res22))))

        diff = magnetic_stress_div(m3).data - stress_div_direct(m3).data
        residuals[IDENTITY_NAMES[2]].append(float(np.max(np.abs(diff))))

        diff = stress_div_direct(mu).data - stress_div_gradform(mu).data
        residuals[IDENTITY_NAMES[3]].append(float(np.max(np.abs(diff))))

        if n == sizes[-1]:
            M = cross_matrix(mu)
            nodal[NODAL_NAMES[0]] = float(np.max(np.abs(
                M + np.swapaxes(M, 0, 1))))
            nodal[NODAL_NAMES[1]] = float(np.max(np.abs(
                nodal_matvec(M, mu.data))))
            F = sample(g, lambda x, y: [[f(x, y) for f in row] for row in F_fns],
                       FREE, (d, d))
            stretch = np.einsum("ki...,kj...->ij...", Gu, F.data)
            lhs_tr = np.einsum("ij...,ij...->...", stretch, F.data)
            rhs_tr = np.einsum("ij...,ij...->...", elastic_stress(F).data, Gu)
            nodal[NODAL_NAMES[2]] = float(np.max(np.abs(lhs_tr - rhs_tr)))

    orders = {}
    for name, res in residuals.items():
        orders[name] = [float(np.log(res[k] / res[k + 1])
                              / np.log(sizes[k + 1] / sizes[k]))
                        for k in range(len(res) - 1)]
    return {"sizes": sizes, "residuals": residuals, "orders": orders,
            "nodal": nodal}


def identity_ok(result, order_lo=1.7, order_hi=2.3, nodal_tol=1e-12) -> bool:
    for seq in result["orders"].values():
        if any(not (order_lo <= o <= order_hi) for o in seq):
            return False
    return all(v <= nodal_tol for v in result["nodal"].values())


def identity_table(result) -> str:
    sizes = result["sizes"]
    width = max(len(n) for n in IDENTITY_NAMES + NODAL_NAMES) + 2
    lines = ["identity".ljust(width)
             + "".join(f"{n:>12}" for n in sizes) + "   orders"]
    for name in IDENTITY_NAMES:
        res = result["residuals"][name]
        ords = ", ".join(f"{o:.2f}" for o in result["orders"][name])
        lines.append(name.ljust(width)
                     + "".join(f"{r:12.3e}" for r in res) + f"   {ords}")
    lines.append("")
    lines.append("nodal identity (finest grid)".ljust(width) + "max residual")
    for name in NODAL_NAMES:
        lines.append(name.ljust(width) + f"{result['nodal'][name]:.3e}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.make_grid()
    out = ensure_dir(args.out or cfg.out_dir)
    state0 = _initial_state(cfg, grid)
    files = {}
    results = {}
    t0 = time.monotonic()

    if cfg.kind == "constrained":
        traj = run(state0, cfg.params, t_end=cfg.t_end, dt=cfg.dt,
                   scheme=cfg.scheme, constraint=cfg.constraint,
                   dt_max=cfg.dt_max, c_cfl=cfg.c_cfl, tol=cfg.solver_tol,
                   save_every=cfg.save_every)
        records = finalize_records(traj.records)
        path = os.path.join(out, f"{cfg.prefix}_energy.csv")
        write_energy_csv(path, records)
        files["energy"] = os.path.basename(path)
        for i, st in enumerate(traj.states):
            p = os.path.join(out, f"{cfg.prefix}_{i:06d}.mgvs")
            write_snapshot(p, st, cfg.params)
            files[f"snapshot_{i:06d}"] = os.path.basename(p)
        bal = dissipation_balance(records) if len(records) > 12 else None
        dev = max(s.sphere_dev for s in traj.stats)
        results["steps"] = len(traj.stats)
        results["dt"] = traj.dt
        results["energy_nonincreasing"] = bool(bal.monotone) if bal else None
        results["balance_max_rel_mismatch"] = \
            float(bal.max_rel_mismatch) if bal else None
        results["max_sphere_deviation"] = float(dev)
        failed = (bal is not None and not bal.monotone) or \
            (cfg.constraint == "projected" and dev > 1e-12)
    else:
        epsilons = cfg.sweep or (cfg.epsilon,)
        failed = False
        for e in epsilons:
            traj = run_gl(state0, cfg.params, e, cfg.t_end, dt=cfg.dt,
                          dt_max=cfg.dt_max, c_cfl=cfg.c_cfl,
                          tol=cfg.solver_tol, save_every=cfg.save_every)
            tag = f"eps{e:g}".replace(".", "p")
            path = os.path.join(out, f"{cfg.prefix}_{tag}_energy.csv")
            write_gl_energy_csv(path, traj.records)
            files[f"energy_{tag}"] = os.path.basename(path)
            p = os.path.join(out, f"{cfg.prefix}_{tag}_final.mgvs")
            write_snapshot(p, traj.final, cfg.params, epsilon=e)
            files[f"snapshot_{tag}"] = os.path.basename(p)
            results[f"final_constraint_dev_{tag}"] = float(traj.constraint[-1])

    walltime = time.monotonic() - t0
    manifest = os.path.join(out, f"{cfg.prefix}_manifest.json")
    write_manifest(manifest, cfg, grid=grid, results=results,
                   walltime=walltime, files=files)
    print(f"wrote {len(files) + 1} files to {out}/ in {walltime:.1f} s")
    for k, v in results.items():
        print(f"  {k}: {v}")
    if failed:
        print("run checks FAILED", file=sys.stderr)
        return 1
    return 0


def _cmd_identities(args) -> int:
    sizes = tuple(int(s) for s in args.grid.split(","))
    result = identity_suite(sizes, seed=args.seed)
    print(identity_table(result))
    ok = identity_ok(result)
    print(f"\nidentity suite: {'PASS' if ok else 'FAIL'} "
          f"(orders in [1.7, 2.3], nodal <= 1e-12)")
    return 0 if ok else 1


def _parse_vec3(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"need 3 comma-separated components, got {text!r}")
    return np.array(parts)


def _cmd_spectrum(args) -> int:
    m_star = _parse_vec3(args.mstar)
    n = np.linalg.norm(m_star)
    if n < 1e-12:
        raise ValueError("m_star must be nonzero")
    m_star = m_star / n
    params = Params(mu_s=args.mu_s, kappa=args.kappa,
                    alpha=args.alpha, beta=args.beta)
    extents = (args.grid,) * args.dim
    grid = make_grid(args.dim, extents)
    op = assemble_linearization(grid, m_star, params)
    rep = spectrum(op)
    semi = semisimplicity_check(op)
    print(rep.to_text())
    print(f"semisimple: {semi.semisimple} "
          f"(dim N = {semi.dim_kernel}, dim N^2 = {semi.dim_kernel_sq}, "
          f"sv gap {semi.sv_gap:.2e})")
    ok = (rep.max_real <= 1e-8 and rep.n_zero == 3 and rep.kernel_dim == 3
          and semi.semisimple and semi.sv_gap >= 1e2)
    print(f"spectrum checks: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_decay(args) -> int:
    params = Params(alpha=args.alpha, beta=args.beta)
    grid = make_grid(args.dim, (args.grid,) * args.dim)
    state0 = perturbed_equilibrium(grid, amplitude=args.amplitude)
    times, dists = [], []

    def watch(k, state, stats):
        rep = detect_equilibrium(state)
        times.append(state.t)
        dists.append(rep.distance)

    traj = run(state0, params, t_end=args.t_end, dt=args.dt,
               scheme=args.scheme, callback=watch)
    fit = fit_decay_rate(np.array(times), np.array(dists))
    final = detect_equilibrium(traj.final)
    op = assemble_linearization(grid, final.m_star, params)
    rep = spectrum(op)
    rate = -fit.rate
    print(f"steps {len(times)}, dt {traj.dt:g}")
    print(f"final distance to equilibrium {final.distance:.3e}, "
          f"|m_inf| - 1 = {final.mean_norm - 1.0:+.2e}")
    print(f"fitted decay rate {rate:.4f} over t in "
          f"[{fit.t_window[0]:.3f}, {fit.t_window[1]:.3f}] "
          f"(R^2 = {fit.r2:.5f}, {fit.n_used} points)")
    print(f"discrete spectral gap {rep.gap:.4f}; "
          f"rate/gap = {rate / rep.gap:.4f}")
    ok = (fit.decaying and fit.r2 >= 0.99
          and abs(rate - rep.gap) <= 0.2 * rep.gap)
    print(f"decay checks: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_gl_compare(args) -> int:
    cfg = load_config(args.config)
    if cfg.kind != "gl" or not cfg.sweep:
        raise ConfigError("gl-compare needs kind = 'gl' and a 'sweep' in [mode]")
    grid = cfg.make_grid()
    out = ensure_dir(args.out or cfg.out_dir)
    state0 = _initial_state(cfg, grid)
    cap = 0.5 * min(cfg.sweep) ** 2
    dt = cfg.dt if cfg.dt is not None else min(cfg.dt_max, cap)
    save_every = cfg.save_every or 0

    ref = run(state0, cfg.params, t_end=cfg.t_end, dt=dt, scheme="imex-euler",
              dt_max=cfg.dt_max, c_cfl=cfg.c_cfl, tol=cfg.solver_tol,
              save_every=save_every)
    reports = []
    for e in cfg.sweep:
        traj = run_gl(state0, cfg.params, e, cfg.t_end, dt=dt,
                      dt_max=cfg.dt_max, c_cfl=cfg.c_cfl, tol=cfg.solver_tol,
                      save_every=save_every)
        reports.append(compare_constrained(traj, ref))
    path = os.path.join(out, f"{cfg.prefix}_deviation.csv")
    write_deviation_csv(path, reports)

    print(f"{'epsilon':>10} {'final l2 dev':>14} {'final constraint':>17}")
    finals = []
    for rep in reports:
        finals.append(rep.linf_constraint[-1])
        print(f"{rep.epsilon:10g} {rep.l2_dev[-1]:14.4e} {finals[-1]:17.4e}")
    decreasing = all(b < a for a, b in zip(finals, finals[1:]))
    print(f"constraint deviation strictly decreasing in epsilon: {decreasing}")
    print(f"wrote {path}")
    return 0 if decreasing else 1


def _cmd_info(_args) -> int:
    from . import __version__, backend_name
    print(f"magvisco {__version__}")
    print(f"compute backend: {backend_name()}")
    print(f"defaults: mu_s=1 kappa=1 alpha=1 beta=0.5, dt_max=1e-3, "
          f"c_cfl=0.4, t_end=5")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="magvisco",
        description="magnetoviscoelastic fluid laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("run", help="integrate a configured model run")
    q.add_argument("config", help="TOML configuration file")
    q.add_argument("--out", help="output directory (overrides [output] dir)")
    q.set_defaults(fn=_cmd_run)

    q = sub.add_parser("identities",
                       help="operator identity residuals under refinement")
    q.add_argument("--grid", default="32,64,128",
                   help="comma-separated grid sizes (default 32,64,128)")
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(fn=_cmd_identities)

    q = sub.add_parser("spectrum", help="linearization spectrum at a rest state")
    q.add_argument("--grid", type=int, default=16)
    q.add_argument("--dim", type=int, default=2, choices=(2, 3))
    q.add_argument("--mstar", default="0,0,1",
                   help="equilibrium direction (normalized)")
    q.add_argument("--mu-s", type=float, default=1.0, dest="mu_s")
    q.add_argument("--kappa", type=float, default=1.0)
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--beta", type=float, default=0.5)
    q.set_defaults(fn=_cmd_spectrum)

    q = sub.add_parser("decay", help="near-equilibrium decay-rate fit")
    q.add_argument("--grid", type=int, default=16)
    q.add_argument("--dim", type=int, default=2, choices=(2, 3))
    q.add_argument("--amplitude", type=float, default=1e-2)
    q.add_argument("--t-end", type=float, default=5.0, dest="t_end")
    q.add_argument("--dt", type=float, default=1e-3)
    q.add_argument("--scheme", default="imex-bdf2",
                   choices=("imex-euler", "imex-bdf2"))
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--beta", type=float, default=0.5)
    q.set_defaults(fn=_cmd_decay)

    q = sub.add_parser("gl-compare",
                       help="penalized sweep against the constrained run")
    q.add_argument("config", help="TOML configuration with kind='gl' and sweep")
    q.add_argument("--out", help="output directory (overrides [output] dir)")
    q.set_defaults(fn=_cmd_gl_compare)

    q = sub.add_parser("info", help="version and backend")
    q.set_defaults(fn=_cmd_info)
    return p


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:  # argparse already printed to stderr
        return 2 if err.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ConfigError, GridError, SnapshotError, FileNotFoundError,
            IsADirectoryError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (IntegrationError, LinearSolveError, StabilityError) as err:
        print(f"computation failed: {err}", file=sys.stderr)
        return 1


def main():
    raise SystemExit(cli(sys.argv[1:]))
