"""Deterministic run artifacts: energy CSV, deviation CSV, manifest JSON.

Floats are printed with '%.17g' so a written value parses back to the
exact same float64 — two runs of the same configuration must produce
byte-identical files.
"""

from __future__ import annotations

import json
import os

ENERGY_HEADER = "t,kinetic,elastic,exchange,total,D_u,D_F,D_m,dE_dt"
GL_ENERGY_HEADER = "t,kinetic,elastic,exchange,penalty,total"
DEVIATION_HEADER = "epsilon,t,l2_dev,linf_constraint"


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_energy_csv(path, records):
    """One row per EnergyRecord, in the order given."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(ENERGY_HEADER + "\n")
        for r in records:
            row = (r.t, r.kinetic, r.elastic, r.exchange, r.total,
                   r.diss_u, r.diss_F, r.diss_m, r.dE_dt)
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_gl_energy_csv(path, records):
    """Penalized-system energy rows (no dissipation split)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(GL_ENERGY_HEADER + "\n")
        for r in records:
            row = (r.t, r.kinetic, r.elastic, r.exchange, r.penalty, r.total)
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_deviation_csv(path, reports):
    """Flattens DeviationReports (one per epsilon) into a single table."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(DEVIATION_HEADER + "\n")
        for rep in reports:
            for t, l2, linf in zip(rep.times, rep.l2_dev, rep.linf_constraint):
                fh.write(",".join(_fmt(v) for v in (rep.epsilon, t, l2, linf)) + "\n")


def write_manifest(path, config, *, grid, results=None, walltime=None,
                   files=None, extra=None):
    """Machine-readable run summary next to the data files.

    `results` is a {name: bool-or-number} map of whatever checks the
    caller ran; `files` maps artifact kind to relative path.
    """
    from . import __version__

    doc = {
        "format": "magvisco-manifest",
        "version": __version__,
        "config": config.as_dict(),
        "grid": {
            "dim": grid.dim,
            "extents": list(grid.extents),
            "box": [list(b) for b in grid.box],
            "spacing": [float(v) for v in grid.spacing],
            "periodic": grid.periodic,
        },
    }
    if walltime is not None:
        doc["walltime_s"] = float(walltime)
    if files:
        doc["files"] = dict(files)
    if results is not None:
        doc["results"] = results
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
