"""Plain-text ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Keys (defaults in brackets):

params   chi (required; comma list allowed), a [1], b [1], mu [1], nu [1], L [1]
grid     dx [0.01], n_points [derived from dx when absent]
sim      dt [5e-5], t_end [50], steady_tol [1e-7], check_every [1000],
         snapshot_every [none]
ic       ic [a/b+0.5*cos(1)]; several profiles separated by ';'
output   out [runs], modes [32]
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields

import numpy as np

from .model import Grid1D, Params, grid_for_spacing, make_grid, read_profile_csv


class ConfigError(ValueError):
    pass


def _float(s):
    return float(s)


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _floats(s):
    return tuple(float(t) for t in s.split(",") if t.strip())


def _opt_float(s):
    return None if s.strip().lower() in ("", "none") else float(s)


def _opt_int(s):
    return None if s.strip().lower() in ("", "none") else _int(s)


def _str(s):
    return s.strip()


SCHEMA = {
    "chi": (_floats, None),
    "a": (_float, 1.0),
    "b": (_float, 1.0),
    "mu": (_float, 1.0),
    "nu": (_float, 1.0),
    "L": (_float, 1.0),
    "dx": (_float, 0.01),
    "n_points": (_opt_int, None),
    "dt": (_float, 5e-5),
    "t_end": (_float, 50.0),
    "steady_tol": (_float, 1e-7),
    "check_every": (_int, 1000),
    "snapshot_every": (_opt_float, None),
    "ic": (_str, "a/b+0.5*cos(1)"),
    "out": (_str, "runs"),
    "modes": (_int, 32),
}
REQUIRED = ("chi",)
POSITIVE = ("a", "b", "mu", "nu", "L", "dx", "dt", "t_end", "steady_tol")


@dataclass(frozen=True)
class RunDescription:
    chi: tuple
    a: float = 1.0
    b: float = 1.0
    mu: float = 1.0
    nu: float = 1.0
    L: float = 1.0
    dx: float = 0.01
    n_points: int | None = None
    dt: float = 5e-5
    t_end: float = 50.0
    steady_tol: float = 1e-7
    check_every: int = 1000
    snapshot_every: float | None = None
    ic: str = "a/b+0.5*cos(1)"
    out: str = "runs"
    modes: int = 32

    def params(self, chi: float | None = None) -> Params:
        return Params(chi=self.chi[0] if chi is None else chi, a=self.a, b=self.b, mu=self.mu,
                      nu=self.nu, L=self.L)

    def grid(self) -> Grid1D:
        if self.n_points is not None:
            return make_grid(self.L, self.n_points)
        return grid_for_spacing(self.L, self.dx)

    def ics(self) -> list:
        return [s.strip() for s in self.ic.split(";") if s.strip()]

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def summary(self) -> str:
        """One-line ``key=value`` rendering used in CSV comment lines."""
        return " ".join(f"{k}={_render(v)}" for k, v in self.as_dict().items())


def _render(v):
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    if v is None:
        return "none"
    return repr(v) if isinstance(v, float) else str(v)


def _validate(values: dict, where: dict):
    for k in REQUIRED:
        if values.get(k) is None:
            raise ConfigError(f"missing required key {k!r}")
    chis = values["chi"]
    if not chis:
        raise ConfigError(f"{where.get('chi', 'chi')}: chi must list at least one value")
    for c in chis:
        if not c > 0:
            raise ConfigError(f"{where.get('chi', 'chi')}: chi must be positive, got {c}")
    for k in POSITIVE:
        if not values[k] > 0:
            raise ConfigError(f"{where.get(k, k)}: {k} must be positive, got {values[k]}")
    if values["n_points"] is not None and values["n_points"] < 3:
        raise ConfigError(f"{where.get('n_points', 'n_points')}: n_points must be >= 3")


def parse_config(text: str, source: str = "<config>", overrides: dict | None = None) -> RunDescription:
    values = {k: d for k, (_, d) in SCHEMA.items()}
    where = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        conv = SCHEMA[key][0]
        try:
            values[key] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        where[key] = f"{source}:{lineno}"
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in SCHEMA:
            raise ConfigError(f"unknown override {key!r}")
        if isinstance(val, str):
            try:
                val = SCHEMA[key][0](val)
            except ValueError as exc:
                raise ConfigError(f"override {key}: {exc}") from None
        if key == "chi" and not isinstance(val, tuple):
            val = tuple(val) if isinstance(val, (list, np.ndarray)) else (float(val),)
        values[key] = val
        where[key] = f"override {key}"
    _validate(values, where)
    return RunDescription(**values)


def load_config(path, overrides: dict | None = None) -> RunDescription:
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, str(path), overrides)


def dump_config(desc: RunDescription) -> str:
    return "".join(f"{k} = {_render(v)}\n" for k, v in desc.as_dict().items())


# initial profiles --------------------------------------------------------

_TERM = re.compile(r"([+-])\s*(?:([0-9.eE+-]*?)\s*\*?\s*)cos\(\s*([0-9]+)\s*\)")


def parse_ic(expr: str, params: Params, grid: Grid1D) -> np.ndarray:
    """Initial profile from ``const [+/- amp*cos(k)]...`` or ``csv:<path>``.

    ``cos(k)`` means ``cos(k pi x / L)``; ``const`` may be a number or ``a/b``.
    """
    expr = expr.strip()
    if expr.startswith("csv:"):
        x, u = read_profile_csv(expr[4:])
        return np.interp(grid.nodes, x, u)
    m = re.match(r"\s*(a/b|[0-9.eE]+)", expr)
    if not m:
        raise ValueError(f"initial profile {expr!r} must start with a constant or a/b")
    const = params.u_const if m.group(1) == "a/b" else float(m.group(1))
    rest = expr[m.end():].replace(" ", "")
    u = np.full(grid.n_points, const)
    pos = 0
    for t in _TERM.finditer(rest):
        if t.start() != pos:
            raise ValueError(f"cannot parse {rest[pos:t.start()]!r} in {expr!r}")
        amp = float(t.group(2)) if t.group(2) else 1.0
        amp = -amp if t.group(1) == "-" else amp
        u += amp * np.cos(int(t.group(3)) * math.pi * grid.nodes / grid.L)
        pos = t.end()
    if pos != len(rest):
        raise ValueError(f"cannot parse {rest[pos:]!r} in {expr!r}")
    return u
