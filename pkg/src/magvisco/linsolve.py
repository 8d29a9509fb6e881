"""Matrix-free Krylov solvers with fixed, deterministic iteration rules.

Both solvers accept ndarray unknowns of any shape and a callable applying
the operator. Convergence is relative: ||r|| <= tol * ||b||. A zero
right-hand side short-circuits to the zero solution, which downstream
code relies on (homogeneous implicit solves stay exactly zero).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LinearSolveError(RuntimeError):
    """Raised on breakdown or when the iteration budget is exhausted."""

    def __init__(self, msg, iterations=0, residual=float("nan")):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


@dataclass
class SolveInfo:
    iterations: int
    residual: float  # relative
    converged: bool


def _dot(a, b) -> float:
    return float(np.vdot(a, b))


def cg(apply_A, b, tol=1e-10, maxiter=None, check=True):
    """Conjugate gradients for a symmetric positive (semi)definite operator."""
    bnorm = float(np.sqrt(_dot(b, b)))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, SolveInfo(0, 0.0, True)
    if maxiter is None:
        maxiter = 10 * b.size
    r = b.copy()
    p = r.copy()
    rs = _dot(r, r)
    for k in range(1, maxiter + 1):
        Ap = apply_A(p)
        pAp = _dot(p, Ap)
        if pAp <= 0.0:
            # Operators here are positive semidefinite by construction, so
            # non-positive curvature means the search direction fell into
            # the kernel's rounding noise: the residual is as small as the
            # range allows. Return the current iterate.
            return x, SolveInfo(k, float(np.sqrt(rs)) / bnorm, True)
        alpha = rs / pAp
        x += alpha * p
        r -= alpha * Ap
        rs_new = _dot(r, r)
        if np.sqrt(rs_new) <= tol * bnorm:
            return x, SolveInfo(k, float(np.sqrt(rs_new)) / bnorm, True)
        p = r + (rs_new / rs) * p
        rs = rs_new
    info = SolveInfo(maxiter, float(np.sqrt(rs)) / bnorm, False)
    if check:
        raise LinearSolveError(
            f"cg: no convergence in {maxiter} iterations (rel res {info.residual:.3e})",
            iterations=maxiter, residual=info.residual)
    return x, info


def bicgstab(apply_A, b, tol=1e-10, maxiter=None, check=True):
    """BiCGStab for a nonsymmetric operator (shadow residual = r0)."""
    bnorm = float(np.sqrt(_dot(b, b)))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, SolveInfo(0, 0.0, True)
    if maxiter is None:
        maxiter = 10 * b.size
    r = b.copy()
    rhat = r.copy()
    rho = 1.0
    alpha = 1.0
    omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    for k in range(1, maxiter + 1):
        rho_new = _dot(rhat, r)
        if rho_new == 0.0 or (k > 1 and omega == 0.0):
            raise LinearSolveError(f"bicgstab: breakdown at iteration {k}",
                                   iterations=k,
                                   residual=float(np.sqrt(_dot(r, r))) / bnorm)
        if k == 1:
            p = r.copy()
        else:
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
        v = apply_A(p)
        denom = _dot(rhat, v)
        if denom == 0.0:
            raise LinearSolveError(f"bicgstab: stagnation at iteration {k}",
                                   iterations=k,
                                   residual=float(np.sqrt(_dot(r, r))) / bnorm)
        alpha = rho_new / denom
        s = r - alpha * v
        snorm = float(np.sqrt(_dot(s, s)))
        if snorm <= tol * bnorm:
            x += alpha * p
            return x, SolveInfo(k, snorm / bnorm, True)
        t = apply_A(s)
        tt = _dot(t, t)
        if tt == 0.0:
            raise LinearSolveError(f"bicgstab: zero t at iteration {k}",
                                   iterations=k, residual=snorm / bnorm)
        omega = _dot(t, s) / tt
        x += alpha * p + omega * s
        r = s - omega * t
        rnorm = float(np.sqrt(_dot(r, r)))
        if rnorm <= tol * bnorm:
            return x, SolveInfo(k, rnorm / bnorm, True)
        rho = rho_new
    info = SolveInfo(maxiter, float(np.sqrt(_dot(r, r))) / bnorm, False)
    if check:
        raise LinearSolveError(
            f"bicgstab: no convergence in {maxiter} iterations (rel res {info.residual:.3e})",
            iterations=maxiter, residual=info.residual)
    return x, info
