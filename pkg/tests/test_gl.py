"""Penalized-variant contracts: right-hand side, stability cap, gradient
structure, energy decay, and convergence toward the constrained flow.
"""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from magvisco import NEUMANN, make_grid, make_state, sample
from magvisco.cli import benchmark_state
from magvisco.gl import (
    C_PEN, compare_constrained, epsilon_sweep, gl_energy, gl_gradient_check,
    gl_rhs, run_gl,
)
from magvisco.integrator import run
from magvisco.params import Params

P = Params()


def _radial_state(g, rho0=1.3):
    s = make_state(g)
    s.m.data[...] = 0.0
    s.m.data[0] = rho0
    return s


def test_gl_rhs_analytic_profile():
    g = make_grid(2, (64, 64))
    eps = 0.2

    def mfun(x, y):
        return [1.0 + 0.3 * np.cos(np.pi * x), 0.0 * x, 0.0 * x]

    m = sample(g, mfun, NEUMANN, (3,))
    out = gl_rhs(m, None, eps)
    x, _ = g.coords()
    f = 1.0 + 0.3 * np.cos(np.pi * x)
    fxx = -0.3 * np.pi ** 2 * np.cos(np.pi * x)
    exact = fxx - (f ** 2 - 1.0) * f / eps ** 2
    assert np.abs(out.data[0] - exact).max() < 2e-2 * np.abs(exact).max()
    assert np.abs(out.data[1:]).max() == 0.0
    with pytest.raises(ValueError, match="epsilon"):
        gl_rhs(m, None, 0.0)


def test_radial_relaxation_matches_ode_oracle():
    # spatially constant m = rho(t) e1 reduces the whole system to the
    # scalar ODE rho' = -(rho^2 - 1) rho / eps^2; compare against an
    # independent stiff integration of that ODE, with dt refinement
    g = make_grid(2, (8, 8))
    rho0, eps, t_end = 1.3, 0.1, 0.02
    sol = solve_ivp(lambda t, r: -(r ** 2 - 1) * r / eps ** 2, (0, t_end),
                    [rho0], rtol=1e-12, atol=1e-14)
    rho_ref = sol.y[0, -1]
    diffs = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        traj = run_gl(_radial_state(g, rho0), P, eps, t_end=t_end, dt=dt)
        fin = traj.final
        assert np.abs(fin.m.data[1:]).max() == 0.0  # stays radial
        assert np.abs(fin.u.data).max() == 0.0      # no flow is generated
        assert np.abs(fin.F.data).max() == 0.0
        diffs.append(abs(fin.m.data[0].mean() - rho_ref))
    assert diffs[-1] < 6e-4
    for a, b in zip(diffs, diffs[1:]):
        assert 1.6 < a / b < 2.4  # first order in dt
    assert abs(rho_ref - 1.0) > 1e-3  # horizon short enough to discriminate


def test_penalty_cap_enforced_and_autoclipped():
    g = make_grid(2, (8, 8))
    s = _radial_state(g)
    cap = C_PEN * 0.02 ** 2
    with pytest.raises(ValueError, match="penalty stability cap"):
        run_gl(s, P, 0.02, t_end=1e-3, dt=1e-3)
    traj = run_gl(s, P, 0.02, t_end=1e-3, dt=None, dt_max=1e-3)
    assert traj.dt <= cap + 1e-18


def test_gl_energy_monotone_coupled():
    g = make_grid(2, (16, 16))
    s0 = benchmark_state(g, amplitude=1.0)
    traj = run_gl(s0, P, 0.1, t_end=0.05, dt=1e-3)
    tot = [r.total for r in traj.records]
    assert all(b <= a + 1e-12 * tot[0] for a, b in zip(tot, tot[1:]))
    r0 = traj.records[0]
    assert r0.total == r0.kinetic + r0.elastic + r0.exchange + r0.penalty
    assert len(traj.records) == len(traj.times) == len(traj.constraint)


def test_gl_energy_penalty_term():
    g = make_grid(2, (8, 8))
    s = _radial_state(g, rho0=1.3)
    rec = gl_energy(s, P, 0.1)
    # phi = rho0^2 - 1 constant: penalty = phi^2 |box| / (4 eps^2)
    phi = 1.3 ** 2 - 1.0
    assert abs(rec.penalty - phi ** 2 / (4 * 0.01)) < 1e-10
    assert rec.exchange == 0.0 and rec.kinetic == 0.0


def test_gradient_check_on_benchmark_field():
    g = make_grid(2, (24, 24))
    m = benchmark_state(g, amplitude=1.0).m
    assert gl_gradient_check(m, 0.1) < 1e-4
    # non-unit smooth field: same variational identity away from the sphere
    mf = sample(g, lambda x, y: [1.0 + 0.4 * np.cos(np.pi * x),
                                 0.3 * np.cos(np.pi * y), 0.2 + 0.0 * x],
                NEUMANN, (3,))
    assert gl_gradient_check(mf, 0.2) < 1e-4


def test_epsilon_sweep_validation():
    g = make_grid(2, (8, 8))
    s = _radial_state(g)
    with pytest.raises(ValueError, match="strictly decreasing"):
        epsilon_sweep(s, P, [0.1, 0.1], t_end=1e-3)
    with pytest.raises(ValueError, match="strictly decreasing"):
        epsilon_sweep(s, P, [0.05, 0.1], t_end=1e-3)
    trajs = epsilon_sweep(s, P, [0.2, 0.1], t_end=1e-3, dt=5e-4)
    assert [t.epsilon for t in trajs] == [0.2, 0.1]


def test_compare_constrained_requires_matching_cadence():
    g = make_grid(2, (8, 8))
    s0 = benchmark_state(g, amplitude=0.5)
    ref = run(s0, P, t_end=4e-3, dt=1e-3, scheme="imex-euler", save_every=1)
    gl = run_gl(s0, P, 0.1, t_end=4e-3, dt=1e-3, save_every=2)
    with pytest.raises(ValueError, match="cadences differ"):
        compare_constrained(gl, ref)


def test_constraint_deviation_scales_with_eps_squared():
    g = make_grid(2, (16, 16))
    s0 = benchmark_state(g, amplitude=1.0)
    ref = run(s0, P, t_end=0.1, dt=1e-3, scheme="imex-euler", save_every=20)
    finals = []
    for e in (0.2, 0.1, 0.05):
        traj = run_gl(s0, P, e, t_end=0.1, dt=1e-3, save_every=20)
        rep = compare_constrained(traj, ref)
        assert rep.times.shape == rep.l2_dev.shape == rep.linf_constraint.shape
        finals.append(rep.linf_constraint[-1])
    assert finals[0] > finals[1] > finals[2] > 0.0
    # O(eps^2) well distance: each epsilon halving buys at least ~4x
    assert finals[0] / finals[1] > 2.0
    assert finals[1] / finals[2] > 2.0


def test_run_gl_rejects_bad_arguments():
    g = make_grid(2, (8, 8))
    s = _radial_state(g)
    with pytest.raises(ValueError, match="epsilon"):
        run_gl(s, P, -0.1, t_end=1e-3)
    with pytest.raises(ValueError, match="t_end"):
        run_gl(s, P, 0.1, t_end=0.0)
