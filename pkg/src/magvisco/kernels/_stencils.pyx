# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled twin of ``_stencils_np``.

Every formula is written with the same per-element expression tree as the
numpy backend (and the extension is built with -ffp-contract=off), so the
two backends return bit-identical arrays. Keep the trees in sync when
editing either module.
"""

import numpy as np

cimport cython

D_ONESIDED = 0
D_REFLECT = 1
D_PERIODIC = 2

L_PIN = 0
L_REFLECT = 1
L_PERIODIC = 2


def dcent(f, axis, hinv, bc):
    """Centered first derivative of one component along ``axis``."""
    out = np.empty_like(f)
    g = np.moveaxis(f, axis, 0)
    o = np.moveaxis(out, axis, 0)
    cdef double c = 0.5 * hinv
    if f.ndim == 2:
        _dcent2(g, o, c, bc)
    elif f.ndim == 3:
        _dcent3(g, o, c, bc)
    else:
        raise ValueError("dcent expects a 2d or 3d component array")
    return out


def lap(f, hinv2, bc):
    """Compact Laplacian of one component; ``hinv2`` is 1/h_a^2 per axis."""
    cdef int code = bc
    if code == L_PIN:
        out = np.zeros_like(f)
    else:
        out = np.empty_like(f)
    if f.ndim == 2:
        _lap2(f, out, hinv2[0], hinv2[1], code)
    elif f.ndim == 3:
        _lap3(f, out, hinv2[0], hinv2[1], hinv2[2], code)
    else:
        raise ValueError("lap expects a 2d or 3d component array")
    return out


cdef void _dcent2(double[:, :] g, double[:, :] o, double c, int bc) except *:
    cdef Py_ssize_t n = g.shape[0], m = g.shape[1], i, j
    for i in range(1, n - 1):
        for j in range(m):
            o[i, j] = (g[i + 1, j] - g[i - 1, j]) * c
    if bc == 0:
        for j in range(m):
            o[0, j] = (-3.0 * g[0, j] + 4.0 * g[1, j] - g[2, j]) * c
            o[n - 1, j] = (3.0 * g[n - 1, j] - 4.0 * g[n - 2, j] + g[n - 3, j]) * c
    elif bc == 1:
        for j in range(m):
            o[0, j] = 0.0
            o[n - 1, j] = 0.0
    elif bc == 2:
        for j in range(m):
            o[0, j] = (g[1, j] - g[n - 1, j]) * c
            o[n - 1, j] = (g[0, j] - g[n - 2, j]) * c
    else:
        raise ValueError(f"unknown dcent closure code {bc}")


cdef void _dcent3(double[:, :, :] g, double[:, :, :] o, double c, int bc) except *:
    cdef Py_ssize_t n = g.shape[0], m = g.shape[1], l = g.shape[2], i, j, k
    for i in range(1, n - 1):
        for j in range(m):
            for k in range(l):
                o[i, j, k] = (g[i + 1, j, k] - g[i - 1, j, k]) * c
    if bc == 0:
        for j in range(m):
            for k in range(l):
                o[0, j, k] = (-3.0 * g[0, j, k] + 4.0 * g[1, j, k] - g[2, j, k]) * c
                o[n - 1, j, k] = (3.0 * g[n - 1, j, k] - 4.0 * g[n - 2, j, k] + g[n - 3, j, k]) * c
    elif bc == 1:
        for j in range(m):
            for k in range(l):
                o[0, j, k] = 0.0
                o[n - 1, j, k] = 0.0
    elif bc == 2:
        for j in range(m):
            for k in range(l):
                o[0, j, k] = (g[1, j, k] - g[n - 1, j, k]) * c
                o[n - 1, j, k] = (g[0, j, k] - g[n - 2, j, k]) * c
    else:
        raise ValueError(f"unknown dcent closure code {bc}")


cdef inline Py_ssize_t _lo(Py_ssize_t i, Py_ssize_t n, int bc) nogil:
    # index of the lower neighbor under the reflect/periodic closure
    if i > 0:
        return i - 1
    return 1 if bc == 1 else n - 1


cdef inline Py_ssize_t _hi(Py_ssize_t i, Py_ssize_t n, int bc) nogil:
    if i < n - 1:
        return i + 1
    return n - 2 if bc == 1 else 0


cdef void _lap2(double[:, :] f, double[:, :] o, double c0, double c1, int bc) except *:
    cdef Py_ssize_t n = f.shape[0], m = f.shape[1], i, j, im, ip, jm, jp
    if bc == 0:
        for i in range(1, n - 1):
            for j in range(1, m - 1):
                o[i, j] = (f[i - 1, j] - 2.0 * f[i, j] + f[i + 1, j]) * c0 \
                    + (f[i, j - 1] - 2.0 * f[i, j] + f[i, j + 1]) * c1
        return
    if bc != 1 and bc != 2:
        raise ValueError(f"unknown lap closure code {bc}")
    for i in range(n):
        im = _lo(i, n, bc)
        ip = _hi(i, n, bc)
        for j in range(m):
            jm = _lo(j, m, bc)
            jp = _hi(j, m, bc)
            o[i, j] = (f[im, j] - 2.0 * f[i, j] + f[ip, j]) * c0 \
                + (f[i, jm] - 2.0 * f[i, j] + f[i, jp]) * c1


cdef void _lap3(double[:, :, :] f, double[:, :, :] o, double c0, double c1,
                double c2, int bc) except *:
    cdef Py_ssize_t n = f.shape[0], m = f.shape[1], l = f.shape[2]
    cdef Py_ssize_t i, j, k, im, ip, jm, jp, km, kp
    if bc == 0:
        for i in range(1, n - 1):
            for j in range(1, m - 1):
                for k in range(1, l - 1):
                    o[i, j, k] = (f[i - 1, j, k] - 2.0 * f[i, j, k] + f[i + 1, j, k]) * c0 \
                        + (f[i, j - 1, k] - 2.0 * f[i, j, k] + f[i, j + 1, k]) * c1 \
                        + (f[i, j, k - 1] - 2.0 * f[i, j, k] + f[i, j, k + 1]) * c2
        return
    if bc != 1 and bc != 2:
        raise ValueError(f"unknown lap closure code {bc}")
    for i in range(n):
        im = _lo(i, n, bc)
        ip = _hi(i, n, bc)
        for j in range(m):
            jm = _lo(j, m, bc)
            jp = _hi(j, m, bc)
            for k in range(l):
                km = _lo(k, l, bc)
                kp = _hi(k, l, bc)
                o[i, j, k] = (f[im, j, k] - 2.0 * f[i, j, k] + f[ip, j, k]) * c0 \
                    + (f[i, jm, k] - 2.0 * f[i, j, k] + f[i, jp, k]) * c1 \
                    + (f[i, j, km] - 2.0 * f[i, j, k] + f[i, j, kp]) * c2
