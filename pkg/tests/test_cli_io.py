"""Config parsing, snapshot/CSV/manifest round-trips, and the CLI surface."""

import json
import struct
import subprocess
import sys

import numpy as np
import pytest

import magvisco
from magvisco.cli import benchmark_state, cli
from magvisco.config import ConfigError, load_config, parse_config
from magvisco.energetics import EnergyRecord
from magvisco.fields import make_state
from magvisco.gl import DeviationReport, GLRecord
from magvisco.grid import make_grid
from magvisco.output import (
    DEVIATION_HEADER, ENERGY_HEADER, GL_ENERGY_HEADER, write_deviation_csv,
    write_energy_csv, write_gl_energy_csv, write_manifest,
)
from magvisco.params import Params
from magvisco.snapshots import (
    SnapshotError, read_snapshot, write_snapshot, write_vtk,
)

# ---------------------------------------------------------------------------
# configuration


def test_config_minimal_defaults():
    cfg = parse_config("[grid]\nextents = 16\n")
    assert cfg.dim == 2
    assert cfg.extents == (16, 16)
    assert cfg.box is None and not cfg.periodic
    assert cfg.params == Params()
    assert cfg.t_end == 5.0 and cfg.dt is None
    assert cfg.dt_max == 1e-3 and cfg.c_cfl == 0.4
    assert cfg.scheme == "imex-bdf2" and cfg.solver_tol == 1e-10
    assert cfg.out_dir == "out" and cfg.save_every == 0 and cfg.prefix == "run"
    assert cfg.kind == "constrained" and cfg.constraint == "projected"
    assert cfg.epsilon is None and cfg.sweep is None
    assert cfg.initial == "benchmark"
    assert cfg.amplitude == 1e-2 and cfg.seed == 0
    g = cfg.make_grid()
    assert g.extents == (16, 16) and not g.periodic


FULL_TOML = """
[physics]
mu_s = 2.0
kappa = 0.5
alpha = 1.5
beta = 0.25

[grid]
dim = 2
extents = [24, 12]
box = [[0.0, 2.0], [0.0, 1.0]]
periodic = true

[time]
t_end = 0.5
dt = 1e-3
dt_max = 5e-4
c_cfl = 0.3
scheme = "imex-euler"
solver_tol = 1e-9

[output]
dir = "results"
save_every = 10
prefix = "demo"

[mode]
kind = "gl"
constraint = "monitored"
sweep = [0.2, 0.1, 0.05]
initial = "equilibrium"
amplitude = 0.5
seed = 7
"""


def test_config_full():
    cfg = parse_config(FULL_TOML)
    assert cfg.params == Params(mu_s=2.0, kappa=0.5, alpha=1.5, beta=0.25)
    assert cfg.extents == (24, 12)
    assert cfg.box == ((0.0, 2.0), (0.0, 1.0))
    assert cfg.periodic
    assert cfg.t_end == 0.5 and cfg.dt == 1e-3 and cfg.dt_max == 5e-4
    assert cfg.c_cfl == 0.3
    assert cfg.scheme == "imex-euler" and cfg.solver_tol == 1e-9
    assert cfg.out_dir == "results" and cfg.save_every == 10
    assert cfg.prefix == "demo"
    assert cfg.kind == "gl" and cfg.sweep == (0.2, 0.1, 0.05)
    assert cfg.constraint == "monitored"
    assert cfg.initial == "equilibrium"
    assert cfg.amplitude == 0.5 and cfg.seed == 7

    d = cfg.as_dict()
    assert d["grid"]["box"] == [[0.0, 2.0], [0.0, 1.0]]
    assert d["time"]["dt"] == 1e-3
    assert d["mode"]["sweep"] == [0.2, 0.1, 0.05]
    assert "epsilon" not in d["mode"]

    g = cfg.make_grid()
    assert g.periodic and g.shape == (24, 12)
    assert g.box == ((0.0, 2.0), (0.0, 1.0))


def test_config_scalar_extents_broadcast():
    cfg = parse_config("[grid]\nextents = 12\ndim = 3\n")
    assert cfg.dim == 3
    assert cfg.extents == (12, 12, 12)
    # list of length > 1 fixes dim on its own
    cfg = parse_config("[grid]\nextents = [12, 8, 6]\n")
    assert cfg.dim == 3


@pytest.mark.parametrize("text, match", [
    ("[junk]\nx = 1\n[grid]\nextents = 8\n", "unknown section"),
    ("[grid]\nextents = 8\ncolour = 1\n", "unknown key 'colour'"),
    ("[grid]\ndim = 2\n", "missing required key 'extents'"),
    ("[grid]\nextents = 8\ndim = 4\n", "'dim' must be 2 or 3"),
    ("[grid]\nextents = [8, 8, 8]\ndim = 2\n", "3 entries for dim 2"),
    ("[grid]\nextents = 8.5\n", "integer or list of integers"),
    ("[grid]\nextents = 8\nbox = [1.0, 2.0]\n", r"list of \[lo, hi\] pairs"),
    ("[grid]\nextents = 8\nperiodic = 1\n", "'periodic' must be a boolean"),
    ("[physics]\nalpha = -3\n[grid]\nextents = 8\n", "alpha"),
    ("[time]\nscheme = 'rk4'\n[grid]\nextents = 8\n", "unknown scheme"),
    ("[time]\nt_end = 0.0\n[grid]\nextents = 8\n", "'t_end' must be positive"),
    ("[time]\ndt = 'fast'\n[grid]\nextents = 8\n", "'dt' must be a number"),
    ("[output]\nsave_every = -1\n[grid]\nextents = 8\n", "nonnegative"),
    ("[mode]\nkind = 'gl'\n[grid]\nextents = 8\n", "needs 'epsilon' or 'sweep'"),
    ("[mode]\nkind = 'gl'\nsweep = [0.1, 0.2]\n[grid]\nextents = 8\n",
     "strictly decreasing"),
    ("[mode]\nkind = 'gl'\nsweep = []\n[grid]\nextents = 8\n", "nonempty list"),
    ("[mode]\nkind = 'steady'\n[grid]\nextents = 8\n", "'kind' must be one of"),
    ("[mode]\ninitial = 'wavy'\n[grid]\nextents = 8\n", "'initial' must be one of"),
    ("[mode]\nseed = 'x'\n[grid]\nextents = 8\n", "'seed' must be an integer"),
    ("not toml [", "malformed config"),
])
def test_config_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_load_config_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("[grid]\nextents = 8\n", encoding="utf-8")
    cfg = load_config(str(p))
    assert cfg.extents == (8, 8)
    with pytest.raises(FileNotFoundError):
        load_config(str(tmp_path / "missing.toml"))


# ---------------------------------------------------------------------------
# snapshots


def _random_state(grid, t, seed):
    rng = np.random.default_rng(seed)
    st = make_state(grid, t=t)
    for arr in (st.u.data, st.F.data, st.m.data, st.pi.data):
        arr[...] = rng.standard_normal(arr.shape)
    return st


def test_snapshot_roundtrip_box_2d(tmp_path):
    grid = make_grid(2, (6, 5), box=((0.0, 2.0), (-1.0, 1.0)))
    st = _random_state(grid, t=0.37, seed=1)
    params = Params(mu_s=2.5, kappa=0.7, alpha=1.2, beta=0.0)
    path = tmp_path / "a.mgvs"
    write_snapshot(path, st, params)

    back, p2, eps = read_snapshot(path)
    assert eps is None
    assert p2 == params
    assert back.t == st.t
    assert back.grid.extents == grid.extents
    assert back.grid.box == grid.box
    assert not back.grid.periodic
    for a, b in ((back.u, st.u), (back.F, st.F), (back.m, st.m),
                 (back.pi, st.pi)):
        assert np.array_equal(a.data, b.data)


def test_snapshot_roundtrip_periodic_3d(tmp_path):
    grid = make_grid(3, (4, 5, 6), periodic=True)
    st = _random_state(grid, t=1.25, seed=2)
    path = tmp_path / "b.mgvs"
    write_snapshot(path, st, Params(), epsilon=0.05)

    back, params, eps = read_snapshot(path)
    assert eps == 0.05
    assert params == Params()
    assert back.grid.periodic and back.grid.extents == (4, 5, 6)
    assert back.F.data.shape[:2] == (3, 3)
    assert np.array_equal(back.F.data, st.F.data)
    assert np.array_equal(back.m.data, st.m.data)


def test_snapshot_corruption(tmp_path):
    grid = make_grid(2, (4, 4))
    path = tmp_path / "c.mgvs"
    write_snapshot(path, _random_state(grid, 0.0, 3), Params())
    raw = path.read_bytes()
    bad = tmp_path / "bad.mgvs"

    bad.write_bytes(b"XGVS" + raw[4:])
    with pytest.raises(SnapshotError, match="not a snapshot file"):
        read_snapshot(bad)

    bad.write_bytes(raw[:4] + struct.pack("<I", 99) + raw[8:])
    with pytest.raises(SnapshotError, match="unsupported snapshot version 99"):
        read_snapshot(bad)

    bad.write_bytes(raw[:-8])
    with pytest.raises(SnapshotError, match="truncated snapshot"):
        read_snapshot(bad)

    bad.write_bytes(raw + b"\x00")
    with pytest.raises(SnapshotError, match="trailing bytes"):
        read_snapshot(bad)


def test_vtk_header_and_counts(tmp_path):
    grid = make_grid(2, (5, 4))
    st = _random_state(grid, 0.5, 4)
    path = tmp_path / "view.vtk"
    write_vtk(path, st)
    lines = path.read_text(encoding="ascii").splitlines()
    assert lines[0] == "# vtk DataFile Version 2.0"
    assert "DIMENSIONS 6 5 1" in lines  # node counts, z padded to 1
    assert "POINT_DATA 30" in lines
    iv = lines.index("VECTORS velocity double")
    row = [float(v) for v in lines[iv + 1].split()]
    assert len(row) == 3 and row[2] == 0.0
    assert lines.count("VECTORS director double") == 1
    assert "SCALARS pressure double" in lines


# ---------------------------------------------------------------------------
# CSV / manifest writers


def test_energy_csv_exact_roundtrip(tmp_path):
    recs = [EnergyRecord(t=0.1 * k, kinetic=np.pi * (k + 1),
                         elastic=np.e / (k + 1), exchange=np.sqrt(2) + k,
                         total=7.0 / 3.0 * (k + 1), diss_u=1.0 / 7.0,
                         diss_F=2.0 / 7.0, diss_m=3.0 / 7.0,
                         dE_dt=-np.pi / (k + 1.0))
            for k in range(4)]
    path = tmp_path / "e.csv"
    write_energy_csv(path, recs)
    assert path.read_text(encoding="ascii").splitlines()[0] == ENERGY_HEADER
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (4, 9)
    for i, r in enumerate(recs):
        expect = [r.t, r.kinetic, r.elastic, r.exchange, r.total,
                  r.diss_u, r.diss_F, r.diss_m, r.dE_dt]
        # 17 significant digits round-trip float64 exactly
        assert data[i].tolist() == expect


def test_gl_and_deviation_csv(tmp_path):
    recs = [GLRecord(t=0.1 * k, kinetic=1.0 + k, elastic=0.5, exchange=0.25,
                     penalty=np.pi / (k + 1), total=2.0 + k) for k in range(3)]
    gpath = tmp_path / "g.csv"
    write_gl_energy_csv(gpath, recs)
    glines = gpath.read_text().splitlines()
    assert glines[0] == GL_ENERGY_HEADER
    assert len(glines) == 4

    reports = [
        DeviationReport(epsilon=0.2, times=np.array([0.0, 0.1]),
                        l2_dev=np.array([0.0, 1e-3]),
                        linf_constraint=np.array([0.0, 4e-2])),
        DeviationReport(epsilon=0.1, times=np.array([0.0, 0.1]),
                        l2_dev=np.array([0.0, 5e-4]),
                        linf_constraint=np.array([0.0, 1e-2])),
    ]
    dpath = tmp_path / "d.csv"
    write_deviation_csv(dpath, reports)
    dlines = dpath.read_text().splitlines()
    assert dlines[0] == DEVIATION_HEADER
    assert len(dlines) == 5  # header + one row per (epsilon, snapshot)
    data = np.loadtxt(dpath, delimiter=",", skiprows=1)
    assert data[0, 0] == 0.2 and data[2, 0] == 0.1
    assert data[3, 3] == 1e-2


def test_manifest_shape(tmp_path):
    cfg = parse_config("[grid]\nextents = 8\n[output]\nprefix = 'x'\n")
    grid = cfg.make_grid()
    path = tmp_path / "m.json"
    write_manifest(path, cfg, grid=grid, results={"steps": 3},
                   walltime=1.5, files={"energy": "x_energy.csv"})
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    data = json.loads(text)
    assert data["format"] == "magvisco-manifest"
    assert data["version"] == magvisco.__version__
    assert data["config"] == json.loads(json.dumps(cfg.as_dict()))
    assert data["grid"]["dim"] == 2
    assert data["grid"]["extents"] == [8, 8]
    assert data["grid"]["box"] == [[0.0, 1.0], [0.0, 1.0]]
    assert data["grid"]["spacing"] == [0.125, 0.125]
    assert data["grid"]["periodic"] is False
    assert data["walltime_s"] == 1.5
    assert data["files"] == {"energy": "x_energy.csv"}
    assert data["results"] == {"steps": 3}


# ---------------------------------------------------------------------------
# CLI


RUN_TOML = """
[grid]
extents = 12

[time]
t_end = 5e-3
dt = 1e-3

[output]
dir = "{out}"
save_every = 5
"""


def _write_cfg(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_cli_run_constrained_tiny(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, RUN_TOML.format(out=out))
    assert cli(["run", cfg]) == 0
    assert (out / "run_energy.csv").exists()
    assert (out / "run_000000.mgvs").exists()
    assert (out / "run_000001.mgvs").exists()
    man = json.loads((out / "run_manifest.json").read_text())
    assert man["results"]["steps"] == 5
    assert man["results"]["dt"] == 1e-3
    assert man["results"]["energy_nonincreasing"] is None  # too short to judge
    assert man["results"]["max_sphere_deviation"] <= 1e-12
    assert sorted(man["files"]) == ["energy", "snapshot_000000",
                                    "snapshot_000001"]
    assert "wrote 4 files" in capsys.readouterr().out


def test_cli_run_determinism(tmp_path):
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        cfg = _write_cfg(tmp_path, RUN_TOML.format(out=out), f"{name}.toml")
        assert cli(["run", cfg]) == 0
        outs.append(out)
    a, b = outs
    assert (a / "run_energy.csv").read_bytes() == \
        (b / "run_energy.csv").read_bytes()
    assert (a / "run_000001.mgvs").read_bytes() == \
        (b / "run_000001.mgvs").read_bytes()


GL_TOML = """
[grid]
extents = 12

[time]
t_end = 5e-3
dt = 1e-3

[output]
dir = "{out}"

[mode]
kind = "gl"
epsilon = 0.1
"""


def test_cli_run_gl_single_epsilon(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, GL_TOML.format(out=out))
    assert cli(["run", cfg]) == 0
    assert (out / "run_eps0p1_energy.csv").exists()
    _, _, eps = read_snapshot(out / "run_eps0p1_final.mgvs")
    assert eps == 0.1
    man = json.loads((out / "run_manifest.json").read_text())
    assert "final_constraint_dev_eps0p1" in man["results"]


SNAP_TOML = """
[grid]
extents = {n}

[time]
t_end = 1e-3
dt = 1e-3

[output]
dir = "{out}"

[mode]
initial = "{snap}"
"""


def test_cli_run_snapshot_initial(tmp_path):
    grid = make_grid(2, (12, 12))
    snap = tmp_path / "seed.mgvs"
    write_snapshot(snap, benchmark_state(grid, 1e-2), Params())
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, SNAP_TOML.format(n=12, out=out, snap=snap))
    assert cli(["run", cfg]) == 0

    mismatch = _write_cfg(tmp_path, SNAP_TOML.format(n=8, out=out, snap=snap),
                          "mm.toml")
    assert cli(["run", mismatch]) == 2


def test_cli_exit_codes(tmp_path, capsys):
    assert cli(["run", str(tmp_path / "missing.toml")]) == 2
    bad = _write_cfg(tmp_path, "[physics]\nalpha = -3\n[grid]\nextents = 8\n",
                     "bad.toml")
    assert cli(["run", bad]) == 2
    unk = _write_cfg(tmp_path, "[grid]\nextents = 8\nwibble = 1\n", "unk.toml")
    assert cli(["run", unk]) == 2
    assert cli(["spectrum", "--mstar", "0,0,0"]) == 2
    notgl = _write_cfg(tmp_path, "[grid]\nextents = 8\n", "c.toml")
    assert cli(["gl-compare", notgl]) == 2
    assert "error:" in capsys.readouterr().err
    assert cli([]) == 2
    assert cli(["frobnicate"]) == 2
    assert cli(["--help"]) == 0


def test_cli_identities_two_grids(capsys):
    assert cli(["identities", "--grid", "32,64"]) == 0
    out = capsys.readouterr().out
    assert "identity suite: PASS" in out
    assert "matrix product rule" in out


def test_cli_spectrum_small(capsys):
    assert cli(["spectrum", "--grid", "12"]) == 0
    out = capsys.readouterr().out
    assert "spectrum checks: PASS" in out
    assert "semisimple: True" in out


def test_cli_info(capsys):
    assert cli(["info"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("magvisco ")
    assert "compute backend:" in out


def test_cli_decay_fast(capsys):
    rc = cli(["decay", "--grid", "8", "--t-end", "2", "--dt", "2e-3"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "decay checks: PASS" in out
    assert "rate/gap" in out


GLC_TOML = """
[grid]
extents = 12

[time]
t_end = 0.05
dt = 1e-3

[output]
dir = "{out}"
save_every = 10

[mode]
kind = "gl"
sweep = [0.2, 0.1]
amplitude = 1.0
"""


def test_cli_gl_compare_sweep(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, GLC_TOML.format(out=out))
    rc = cli(["gl-compare", cfg])
    text = capsys.readouterr().out
    assert rc == 0
    assert "strictly decreasing in epsilon: True" in text
    lines = (out / "run_deviation.csv").read_text().splitlines()
    assert lines[0] == DEVIATION_HEADER
    assert len(lines) == 1 + 2 * 6  # two epsilons, six snapshots each


def test_module_entrypoint_info():
    proc = subprocess.run([sys.executable, "-m", "magvisco", "info"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "magvisco" in proc.stdout
