"""Run configuration from TOML.

Five sections, all optional except [grid] (which must give extents):

    [physics]  mu_s kappa alpha beta
    [grid]     dim extents box periodic
    [time]     t_end dt dt_max c_cfl scheme solver_tol
    [output]   dir save_every prefix
    [mode]     kind constraint epsilon sweep initial amplitude seed

Unknown sections or keys are rejected by name — a typo must not
silently fall back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py<3.11
    import tomli as tomllib

from .grid import Grid, make_grid
from .params import Params


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "physics": {"mu_s", "kappa", "alpha", "beta"},
    "grid": {"dim", "extents", "box", "periodic"},
    "time": {"t_end", "dt", "dt_max", "c_cfl", "scheme", "solver_tol"},
    "output": {"dir", "save_every", "prefix"},
    "mode": {"kind", "constraint", "epsilon", "sweep", "initial", "amplitude", "seed"},
}

KINDS = ("constrained", "gl")
INITIALS = ("benchmark", "equilibrium")  # or a .mgvs snapshot path


@dataclass(frozen=True)
class SimConfig:
    params: Params
    dim: int
    extents: tuple
    box: tuple | None
    periodic: bool
    t_end: float
    dt: float | None
    dt_max: float
    c_cfl: float
    scheme: str
    solver_tol: float
    out_dir: str
    save_every: int
    prefix: str
    kind: str
    constraint: str
    epsilon: float | None
    sweep: tuple | None
    initial: str
    amplitude: float
    seed: int

    def make_grid(self) -> Grid:
        return make_grid(self.dim, self.extents, box=self.box, periodic=self.periodic)

    def as_dict(self) -> dict:
        d = {
            "physics": {"mu_s": self.params.mu_s, "kappa": self.params.kappa,
                        "alpha": self.params.alpha, "beta": self.params.beta},
            "grid": {"dim": self.dim, "extents": list(self.extents),
                     "periodic": self.periodic},
            "time": {"t_end": self.t_end, "dt_max": self.dt_max,
                     "c_cfl": self.c_cfl, "scheme": self.scheme,
                     "solver_tol": self.solver_tol},
            "output": {"dir": self.out_dir, "save_every": self.save_every,
                       "prefix": self.prefix},
            "mode": {"kind": self.kind, "constraint": self.constraint,
                     "initial": self.initial, "amplitude": self.amplitude,
                     "seed": self.seed},
        }
        if self.box is not None:
            d["grid"]["box"] = [list(b) for b in self.box]
        if self.dt is not None:
            d["time"]["dt"] = self.dt
        if self.epsilon is not None:
            d["mode"]["epsilon"] = self.epsilon
        if self.sweep is not None:
            d["mode"]["sweep"] = list(self.sweep)
        return d


def _check_keys(data: dict):
    for section, body in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")


def _number(section: dict, key: str, default, positive=False):
    v = section.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {v!r}")
    v = float(v)
    if positive and v <= 0.0:
        raise ConfigError(f"'{key}' must be positive, got {v}")
    return v


def parse_config(text: str) -> SimConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"malformed config: {err}") from err
    _check_keys(data)

    phys = data.get("physics", {})
    try:
        params = Params(mu_s=_number(phys, "mu_s", 1.0),
                        kappa=_number(phys, "kappa", 1.0),
                        alpha=_number(phys, "alpha", 1.0),
                        beta=_number(phys, "beta", 0.5))
    except ValueError as err:
        raise ConfigError(str(err)) from err

    grid_s = data.get("grid", {})
    if "extents" not in grid_s:
        raise ConfigError("missing required key 'extents' in [grid]")
    extents = grid_s["extents"]
    if isinstance(extents, int):
        extents = [extents]
    if not (isinstance(extents, list) and all(isinstance(e, int) for e in extents)):
        raise ConfigError("'extents' must be an integer or list of integers")
    dim = grid_s.get("dim", len(extents) if len(extents) > 1 else 2)
    if not isinstance(dim, int) or dim not in (2, 3):
        raise ConfigError(f"'dim' must be 2 or 3, got {dim!r}")
    if len(extents) == 1:
        extents = extents * dim
    if len(extents) != dim:
        raise ConfigError(f"'extents' has {len(extents)} entries for dim {dim}")
    box = grid_s.get("box")
    if box is not None:
        try:
            box = tuple((float(a), float(b)) for a, b in box)
        except (TypeError, ValueError) as err:
            raise ConfigError("'box' must be a list of [lo, hi] pairs") from err
        if len(box) != dim:
            raise ConfigError(f"'box' has {len(box)} pairs for dim {dim}")
    periodic = grid_s.get("periodic", False)
    if not isinstance(periodic, bool):
        raise ConfigError("'periodic' must be a boolean")

    time_s = data.get("time", {})
    scheme = time_s.get("scheme", "imex-bdf2")
    if scheme not in ("imex-euler", "imex-bdf2"):
        raise ConfigError(f"unknown scheme {scheme!r}")

    out_s = data.get("output", {})
    save_every = out_s.get("save_every", 0)
    if not isinstance(save_every, int) or save_every < 0:
        raise ConfigError(f"'save_every' must be a nonnegative integer, got {save_every!r}")

    mode_s = data.get("mode", {})
    kind = mode_s.get("kind", "constrained")
    if kind not in KINDS:
        raise ConfigError(f"'kind' must be one of {KINDS}, got {kind!r}")
    constraint = mode_s.get("constraint", "projected")
    if constraint not in ("projected", "monitored"):
        raise ConfigError(f"'constraint' must be projected or monitored, got {constraint!r}")
    epsilon = _number(mode_s, "epsilon", None, positive=True)
    if kind == "gl" and epsilon is None and "sweep" not in mode_s:
        raise ConfigError("gl mode needs 'epsilon' or 'sweep' in [mode]")
    sweep = mode_s.get("sweep")
    if sweep is not None:
        if not (isinstance(sweep, list) and sweep
                and all(isinstance(e, (int, float)) and e > 0 for e in sweep)):
            raise ConfigError("'sweep' must be a nonempty list of positive numbers")
        sweep = tuple(float(e) for e in sweep)
        if any(b >= a for a, b in zip(sweep, sweep[1:])):
            raise ConfigError("'sweep' must be strictly decreasing")
    initial = mode_s.get("initial", "benchmark")
    if not isinstance(initial, str) or \
            (initial not in INITIALS and not initial.endswith(".mgvs")):
        raise ConfigError(
            f"'initial' must be one of {INITIALS} or a .mgvs path, got {initial!r}")
    seed = mode_s.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"'seed' must be an integer, got {seed!r}")

    return SimConfig(
        params=params,
        dim=dim,
        extents=tuple(extents),
        box=box,
        periodic=periodic,
        t_end=_number(time_s, "t_end", 5.0, positive=True),
        dt=_number(time_s, "dt", None, positive=True),
        dt_max=_number(time_s, "dt_max", 1e-3, positive=True),
        c_cfl=_number(time_s, "c_cfl", 0.4, positive=True),
        scheme=scheme,
        solver_tol=_number(time_s, "solver_tol", 1e-10, positive=True),
        out_dir=str(out_s.get("dir", "out")),
        save_every=save_every,
        prefix=str(out_s.get("prefix", "run")),
        kind=kind,
        constraint=constraint,
        epsilon=epsilon,
        sweep=sweep,
        initial=initial,
        amplitude=_number(mode_s, "amplitude", 1e-2, positive=True),
        seed=seed,
    )


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
