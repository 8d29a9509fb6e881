"""Numpy reference implementation of the stencil kernels.

Second-order centered stencils on node-centered grids. Boundary closures:

* first derivative (``dcent``): one-sided second order (code 0), mirror
  reflection about the boundary node giving a zero normal derivative
  (code 1), or periodic wrap (code 2);
* compact Laplacian (``lap``): zero output rows on the boundary with the
  interior stencil reading stored boundary values (code 0, for fields
  pinned to zero on the boundary), reflected ghosts (code 1), or
  periodic wrap (code 2).

The compiled backend mirrors these functions with identical per-element
expression trees, so both produce bit-identical output.
"""

import numpy as np

# first-derivative closures
D_ONESIDED = 0
D_REFLECT = 1
D_PERIODIC = 2

# Laplacian closures
L_PIN = 0
L_REFLECT = 1
L_PERIODIC = 2


def dcent(f, axis, hinv, bc):
    """Centered first derivative of one component along ``axis``."""
    out = np.empty_like(f)
    g = np.moveaxis(f, axis, 0)
    o = np.moveaxis(out, axis, 0)
    c = 0.5 * hinv
    o[1:-1] = (g[2:] - g[:-2]) * c
    if bc == D_ONESIDED:
        o[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) * c
        o[-1] = (3.0 * g[-1] - 4.0 * g[-2] + g[-3]) * c
    elif bc == D_REFLECT:
        o[0] = 0.0
        o[-1] = 0.0
    elif bc == D_PERIODIC:
        o[0] = (g[1] - g[-1]) * c
        o[-1] = (g[0] - g[-2]) * c
    else:
        raise ValueError(f"unknown dcent closure code {bc}")
    return out


def _d2_axis(f, axis, bc):
    # second difference along one axis, with closures; no 1/h^2 factor
    d = np.empty_like(f)
    g = np.moveaxis(f, axis, 0)
    o = np.moveaxis(d, axis, 0)
    o[1:-1] = g[:-2] - 2.0 * g[1:-1] + g[2:]
    if bc == L_REFLECT:
        o[0] = g[1] - 2.0 * g[0] + g[1]
        o[-1] = g[-2] - 2.0 * g[-1] + g[-2]
    elif bc == L_PERIODIC:
        o[0] = g[-1] - 2.0 * g[0] + g[1]
        o[-1] = g[-2] - 2.0 * g[-1] + g[0]
    else:
        raise ValueError(f"unknown lap closure code {bc}")
    return d


def lap(f, hinv2, bc):
    """Compact Laplacian of one component; ``hinv2`` is 1/h_a^2 per axis."""
    if bc == L_PIN:
        out = np.zeros_like(f)
        core = tuple(slice(1, -1) for _ in range(f.ndim))
        acc = None
        for a in range(f.ndim):
            sl_m = list(core)
            sl_p = list(core)
            sl_m[a] = slice(0, -2)
            sl_p[a] = slice(2, None)
            term = (f[tuple(sl_m)] - 2.0 * f[core] + f[tuple(sl_p)]) * hinv2[a]
            acc = term if acc is None else acc + term
        out[core] = acc
        return out
    acc = None
    for a in range(f.ndim):
        term = _d2_axis(f, a, bc) * hinv2[a]
        acc = term if acc is None else acc + term
    return acc
