"""Krylov solver contracts and the discrete Helmholtz split.

The projection's defining property is variational: the corrected field is
W-orthogonal to every discrete gradient. Tests check that property
directly (not via the compact divergence, which the wide stencil does not
annihilate node-by-node on box grids).
"""

import numpy as np
import pytest

from magvisco import FREE, PERIODIC, Field, inner_product_L2, make_grid, sample
from magvisco.leray import (
    grad_scalar, helmholtz_project, interior_divergence_max,
    pressure_poisson, weighted_mean,
)
from magvisco.linsolve import LinearSolveError, SolveInfo, bicgstab, cg


# ---------------------------------------------------------------- linsolve

def _spd_system(n, seed=3):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    A = B @ B.T + n * np.eye(n)
    x_true = rng.standard_normal(n)
    return A, x_true, A @ x_true


def test_cg_solves_spd():
    A, x_true, b = _spd_system(40)
    x, info = cg(lambda p: A @ p, b, tol=1e-12)
    assert info.converged
    assert np.linalg.norm(x - x_true) / np.linalg.norm(x_true) < 1e-10
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b) * 1.01


def test_cg_zero_rhs_short_circuits():
    # Homogeneous implicit solves rely on getting exact zeros back.
    A, _, _ = _spd_system(10)
    x, info = cg(lambda p: A @ p, np.zeros(10))
    assert np.all(x == 0.0)
    assert info == SolveInfo(0, 0.0, True)


def test_cg_budget_exhaustion_raises_with_stats():
    A, _, b = _spd_system(60, seed=7)
    with pytest.raises(LinearSolveError) as ei:
        cg(lambda p: A @ p, b, tol=1e-14, maxiter=2)
    assert ei.value.iterations == 2
    assert np.isfinite(ei.value.residual) and ei.value.residual > 0.0
    x, info = cg(lambda p: A @ p, b, tol=1e-14, maxiter=2, check=False)
    assert not info.converged and info.iterations == 2


def test_cg_accepts_ndarray_unknowns():
    # Operator and rhs shaped like a 2D nodal array, not a flat vector.
    x, info = cg(lambda p: 4.0 * p, 2.0 * np.ones((5, 7)), tol=1e-14)
    assert info.converged
    assert np.allclose(x, 0.5, atol=1e-14)


def test_bicgstab_nonsymmetric():
    rng = np.random.default_rng(11)
    n = 40
    A = np.eye(n) * n + rng.standard_normal((n, n))  # diagonally dominant
    x_true = rng.standard_normal(n)
    b = A @ x_true
    x, info = bicgstab(lambda p: A @ p, b, tol=1e-12)
    assert info.converged
    assert np.linalg.norm(x - x_true) / np.linalg.norm(x_true) < 1e-9


def test_bicgstab_zero_rhs_and_budget():
    A = np.diag(np.arange(1.0, 9.0))
    x, info = bicgstab(lambda p: A @ p, np.zeros(8))
    assert np.all(x == 0.0) and info == SolveInfo(0, 0.0, True)
    rng = np.random.default_rng(2)
    M = np.eye(30) * 30 + rng.standard_normal((30, 30))
    with pytest.raises(LinearSolveError):
        bicgstab(lambda p: M @ p, rng.standard_normal(30), tol=1e-15, maxiter=1)


# ------------------------------------------------------- pressure poisson

def test_pressure_poisson_manufactured_box():
    g = make_grid(2, (48, 48))
    # psi = cos(pi x) cos(pi y) has zero normal derivative and zero mean.
    psi_exact = sample(g, lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y))
    rhs = sample(g, lambda x, y: -2.0 * np.pi ** 2
                 * np.cos(np.pi * x) * np.cos(np.pi * y))
    out = pressure_poisson(rhs, tol=1e-12)
    assert out.solver == "cg"
    err = np.abs(out.psi.data - psi_exact.data).max()
    assert err < 5e-3  # second-order discretization error at h = 1/48
    assert abs(weighted_mean(g, out.psi.data)) < 1e-12


def test_pressure_poisson_periodic_fft():
    g = make_grid(2, (32, 32), periodic=True)
    rhs = sample(g, lambda x, y: np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y),
                 PERIODIC)
    out = pressure_poisson(rhs)
    assert out.solver == "fft" and out.iterations == 0
    assert out.residual < 1e-13  # symbol inversion is exact
    assert abs(weighted_mean(g, out.psi.data)) < 1e-14


def test_pressure_poisson_reports_incompatible_mean():
    g = make_grid(2, (12, 12))
    rhs = sample(g, lambda x, y: 1.0 + 0.0 * x)  # pure mean: nothing to solve
    out = pressure_poisson(rhs, tol=1e-10)
    assert out.warnings and "mean" in out.warnings[0]
    assert abs(out.mean_removed - 1.0) < 1e-12
    assert np.abs(out.psi.data).max() < 1e-8


# ----------------------------------------------------- helmholtz projection

def _w_dot(grid, a, b):
    w = grid.quad_weights()
    return float(np.sum(w * np.sum(a * b, axis=0)))


def _gradient_orthogonality(res, probes=4, seed=0):
    """max |(v_sigma | grad phi)_W| over random smooth probes phi."""
    g = res.v_sigma.grid
    rng = np.random.default_rng(seed)
    modes = [idx for idx in np.ndindex(*(3,) * g.dim)]
    worst = 0.0
    for _ in range(probes):
        c = rng.standard_normal(len(modes))
        if g.periodic:
            def fn(*xs):
                out = 0.0
                for a, idx in zip(c, modes):
                    phase = sum(2 * np.pi * k * x for k, x in zip(idx, xs))
                    out = out + a * np.cos(phase + 0.37 * sum(idx))
                return out
            phi = sample(g, fn, PERIODIC)
        else:
            def fn(*xs):
                out = 0.0
                for a, idx in zip(c, modes):
                    term = a
                    for k, x in zip(idx, xs):
                        term = term * np.cos(k * np.pi * x)
                    out = out + term
                return out
            phi = sample(g, fn)
        gp = grad_scalar(phi)
        worst = max(worst, abs(_w_dot(g, res.v_sigma.data, gp.data)))
    return worst


def test_project_removes_pure_gradient():
    g = make_grid(2, (24, 24))
    phi = sample(g, lambda x, y: np.cos(np.pi * x) * np.cos(2 * np.pi * y))
    v = grad_scalar(phi)
    res = helmholtz_project(v, tol=1e-12)
    scale = np.abs(v.data).max()
    assert np.abs(res.v_sigma.data).max() < 1e-8 * scale
    # the recovered potential reproduces the gradient, not just kills it
    assert np.abs(res.grad_psi.data - v.data).max() < 1e-8 * scale


def test_project_keeps_discretely_solenoidal_field():
    g = make_grid(2, (24, 24), periodic=True)
    v = sample(g, lambda x, y: [np.sin(2 * np.pi * y), np.sin(2 * np.pi * x)],
               PERIODIC, (2,))
    res = helmholtz_project(v)
    assert res.solver == "fft"
    assert np.abs(res.v_sigma.data - v.data).max() < 1e-14
    assert np.abs(res.psi.data).max() < 1e-14


def test_project_is_idempotent_and_orthogonal_box():
    g = make_grid(2, (20, 20))
    v = sample(g, lambda x, y: [x * x * y + np.sin(np.pi * y),
                                np.cos(np.pi * x) * y], FREE, (2,))
    res = helmholtz_project(v, tol=1e-13)
    # reconstruction is exact by construction
    assert np.abs(res.v_sigma.data + res.grad_psi.data - v.data).max() < 1e-15
    scale = np.abs(v.data).max()
    assert _gradient_orthogonality(res) < 1e-9 * scale
    res2 = helmholtz_project(res.v_sigma, tol=1e-13)
    assert np.abs(res2.grad_psi.data).max() < 1e-8 * scale
    # energy split: |v|^2 = |v_sigma|^2 + |grad psi|^2 up to solver tol
    vv = _w_dot(g, v.data, v.data)
    ss = _w_dot(g, res.v_sigma.data, res.v_sigma.data)
    gg = _w_dot(g, res.grad_psi.data, res.grad_psi.data)
    assert abs(vv - ss - gg) < 1e-9 * vv


def test_project_periodic_orthogonal_and_divfree():
    g = make_grid(2, (32, 32), periodic=True)
    v = sample(g, lambda x, y: [np.cos(2 * np.pi * x) + np.sin(2 * np.pi * y),
                                np.sin(2 * np.pi * (x + y))], PERIODIC, (2,))
    res = helmholtz_project(v)
    scale = np.abs(v.data).max()
    assert _gradient_orthogonality(res) < 1e-12 * scale
    assert interior_divergence_max(res.v_sigma) < 1e-12 * scale
    res2 = helmholtz_project(res.v_sigma)
    assert np.abs(res2.grad_psi.data).max() < 1e-12 * scale


def test_project_interior_divergence_box():
    from magvisco import kernels
    g = make_grid(2, (24, 24))
    # zero normal trace (the velocity case): divergence dies everywhere
    v = sample(g, lambda x, y: [np.sin(np.pi * x) ** 2 * np.sin(2 * np.pi * y),
                                np.sin(np.pi * y) ** 2 * np.sin(2 * np.pi * x)],
               FREE, (2,))
    res = helmholtz_project(v, tol=1e-13)
    assert interior_divergence_max(res.v_sigma) < 1e-10 * np.abs(v.data).max()
    # nonzero normal trace: the correction cannot touch v . n, so the
    # mismatch parks on the first node ring; deeper nodes still satisfy
    # the adjoint conditions at solver tolerance
    w = sample(g, lambda x, y: [y + x * x, x - y * y], FREE, (2,))
    res_w = helmholtz_project(w, tol=1e-13)
    div = None
    for a in range(2):
        t = kernels.dcent(res_w.v_sigma.data[a], a, g.hinv[a], kernels.D_ONESIDED)
        div = t if div is None else div + t
    assert np.abs(div[2:-2, 2:-2]).max() < 1e-10 * np.abs(w.data).max()


def test_project_preserves_normal_trace():
    # Correction is a reflect-closure gradient: zero normal derivative on
    # faces, so v . n is untouched there.
    g = make_grid(2, (16, 16))
    v = sample(g, lambda x, y: [np.sin(np.pi * x) + y, x * y], FREE, (2,))
    res = helmholtz_project(v, tol=1e-12)
    gp = res.grad_psi.data
    assert np.abs(gp[0][0, :]).max() == 0.0
    assert np.abs(gp[0][-1, :]).max() == 0.0
    assert np.abs(gp[1][:, 0]).max() == 0.0
    assert np.abs(gp[1][:, -1]).max() == 0.0


def test_project_rejects_wrong_shape():
    from magvisco.fields import FieldError
    g = make_grid(2, (8, 8))
    s = sample(g, lambda x, y: x * y)
    with pytest.raises(FieldError):
        helmholtz_project(s)


def test_project_3d_box():
    g = make_grid(3, (10, 10, 10))
    v = sample(g, lambda x, y, z: [y * z, x + z * z, x * y], FREE, (3,))
    res = helmholtz_project(v, tol=1e-12)
    assert np.abs(res.v_sigma.data + res.grad_psi.data - v.data).max() < 1e-15
    assert _gradient_orthogonality(res, probes=2) < 1e-8 * np.abs(v.data).max()
