"""Binary state snapshots.

Layout (all little-endian, written in one pass):

    magic    4 bytes  b"MGVS"
    version  uint32   currently 1
    dim      uint32   2 or 3
    flags    uint32   bit 0 = periodic
    extents  dim * uint64
    box      2*dim * float64   (lo, hi per axis)
    t        float64
    params   5 * float64       mu_s kappa alpha beta epsilon (nan if unset)
    u        dim   * prod(extents) * float64, C order
    F        dim^2 * prod(extents) * float64
    m        3     * prod(extents) * float64
    pi       prod(extents) * float64

Round-trips are bit-exact: the arrays are dumped and restored as raw
float64 buffers with no text formatting in between.
"""

from __future__ import annotations

import struct

import numpy as np

from .fields import State, make_state
from .grid import make_grid
from .params import Params

MAGIC = b"MGVS"
VERSION = 1


class SnapshotError(ValueError):
    pass


def write_snapshot(path, state: State, params: Params, epsilon=None):
    grid = state.grid
    dim = grid.dim
    flags = 1 if grid.periodic else 0
    eps = float("nan") if epsilon is None else float(epsilon)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, dim, flags))
        fh.write(struct.pack(f"<{dim}Q", *grid.extents))
        for lo, hi in grid.box:
            fh.write(struct.pack("<dd", lo, hi))
        fh.write(struct.pack("<6d", state.t, params.mu_s, params.kappa,
                             params.alpha, params.beta, eps))
        for arr in (state.u.data, state.F.data, state.m.data, state.pi.data):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise SnapshotError(f"truncated snapshot: expected {n} bytes of {what}, "
                            f"got {len(buf)}")
    return buf


def read_snapshot(path):
    """Returns (state, params, epsilon); epsilon is None when the file
    was written without one."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise SnapshotError(f"bad magic {magic!r}, not a snapshot file")
        version, dim, flags = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if version != VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        if dim not in (2, 3):
            raise SnapshotError(f"bad dimension {dim}")
        extents = struct.unpack(f"<{dim}Q", _read_exact(fh, 8 * dim, "extents"))
        box = []
        for _ in range(dim):
            box.append(struct.unpack("<dd", _read_exact(fh, 16, "box")))
        t, mu_s, kappa, alpha, beta, eps = struct.unpack(
            "<6d", _read_exact(fh, 48, "scalars"))
        grid = make_grid(dim, extents, box=tuple(box), periodic=bool(flags & 1))
        state = make_state(grid, t=t)
        for arr, what in ((state.u.data, "u"), (state.F.data, "F"),
                          (state.m.data, "m"), (state.pi.data, "pi")):
            nbytes = arr.size * 8
            raw = np.frombuffer(_read_exact(fh, nbytes, what), dtype="<f8")
            arr[...] = raw.reshape(arr.shape)
        trailing = fh.read(1)
        if trailing:
            raise SnapshotError("trailing bytes after snapshot payload")
    params = Params(mu_s=mu_s, kappa=kappa, alpha=alpha, beta=beta)
    epsilon = None if np.isnan(eps) else eps
    return state, params, epsilon


def write_vtk(path, state: State):
    """Legacy-ASCII structured-points dump for eyeballing in ParaView.
    Lossy (text formatting); not a round-trip format."""
    grid = state.grid
    dim = grid.dim
    ext = tuple(grid.shape) + (1,) * (3 - dim)
    spacing = tuple(grid.spacing) + (1.0,) * (3 - dim)
    origin = tuple(lo for lo, _ in grid.box) + (0.0,) * (3 - dim)
    n = int(np.prod(grid.shape))

    def vec3(data):
        comps = [data[i].reshape(-1, order="F") for i in range(data.shape[0])]
        while len(comps) < 3:
            comps.append(np.zeros(n))
        return np.stack(comps, axis=1)

    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write(f"state t={state.t:.17g}\n")
        fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {ext[0]} {ext[1]} {ext[2]}\n")
        fh.write(f"ORIGIN {origin[0]:.17g} {origin[1]:.17g} {origin[2]:.17g}\n")
        fh.write(f"SPACING {spacing[0]:.17g} {spacing[1]:.17g} {spacing[2]:.17g}\n")
        fh.write(f"POINT_DATA {n}\n")
        fh.write("VECTORS velocity double\n")
        for row in vec3(state.u.data):
            fh.write(f"{row[0]:.17g} {row[1]:.17g} {row[2]:.17g}\n")
        fh.write("VECTORS director double\n")
        for row in vec3(state.m.data):
            fh.write(f"{row[0]:.17g} {row[1]:.17g} {row[2]:.17g}\n")
        fh.write("SCALARS pressure double\nLOOKUP_TABLE default\n")
        for v in state.pi.data.reshape(-1, order="F"):
            fh.write(f"{v:.17g}\n")
