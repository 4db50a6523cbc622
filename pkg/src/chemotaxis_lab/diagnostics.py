"""Checks on computed stationary profiles and a discrete spike criterion.

A point ``x*`` is treated as spiky for a family of steady states ``u(.; chi)``
when, over the tail of the family, the oscillation ``max - min`` of ``u`` on
every window ``[x* - delta, x* + delta]`` of a shrinking ladder of widths
stays above ``sigma_star``.  This is a finite stand-in for a liminf over
``chi -> infinity``; the thresholds are engineering defaults, not constants
taken from the analysis, and every report carries the values used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import solve_chemical
from .model import Grid1D, Params, check_profile

DELTA_LADDER = (1.0, 0.5)
SIGMA_FRACTION = 0.25  # sigma_star / (a/b)
DELTA_FRACTION = 0.2  # delta_star / L
MARGIN_FRACTION = 0.25  # candidate clearance above a/b, in units of a/b
IDENTITY_TOL = 1e-6
LOG_SLOPE_SLACK = 0.05


def _family(family, grid, min_size=3):
    if len(family) < min_size:
        raise ValueError(f"need a family of at least {min_size} profiles, got {len(family)}")
    chis = [float(c) for c, _ in family]
    if any(c2 <= c1 for c1, c2 in zip(chis, chis[1:])):
        raise ValueError("family must be ordered by increasing chi")
    return chis, [check_profile(u, grid, "u") for _, u in family]


def window_oscillation(u, x_star: float, delta: float, grid: Grid1D) -> float:
    """``max - min`` of ``u`` over nodes in ``[x* - delta, x* + delta]`` clipped to ``[0, L]``."""
    u = check_profile(u, grid, "u")
    if not 0.0 <= x_star <= grid.L:
        raise ValueError(f"x_star={x_star} outside [0, {grid.L}]")
    if delta < grid.dx * (1 - 1e-12):
        raise ValueError(f"delta={delta} is below the grid spacing {grid.dx}")
    x = grid.nodes
    tol = 1e-12 * grid.L
    mask = (x >= x_star - delta - tol) & (x <= x_star + delta + tol)
    w = u[mask]
    return float(w.max() - w.min())


def local_maxima(u, grid: Grid1D) -> np.ndarray:
    """Indices of local maximisers, endpoints included (Neumann reflection).

    Plateaus count once, at their centre node.
    """
    u = np.asarray(u)
    n = u.size
    ext = np.concatenate(([u[1]], u, [u[-2]]))
    out = []
    i = 1
    while i <= n:
        j = i
        while j + 1 <= n and ext[j + 1] == ext[i]:
            j += 1
        if ext[i] > ext[i - 1] and ext[j] > ext[j + 1]:
            out.append((i + j) // 2 - 1)
        i = j + 1
    return np.array(sorted(set(out)), dtype=int)


@dataclass
class SpikyPoint:
    x: float
    osc: dict  # delta -> min oscillation over the family tail
    spiky: bool


@dataclass
class SpikeReport:
    spiky_points: list
    candidates: list
    sigma_star: float
    delta_star: float
    deltas: tuple
    margin: float
    chis: list
    table: list = field(default_factory=list)  # (chi, x*, delta, osc) rows

    @property
    def locations(self) -> list:
        return [p.x for p in self.spiky_points]


def detect_spiky_points(family, grid: Grid1D, params: Params, sigma_star: float | None = None,
                        delta_star: float | None = None, margin: float | None = None) -> SpikeReport:
    """Spiky points of a family ``[(chi, u), ...]`` ordered by increasing chi.

    Defaults: ``sigma_star = 0.25 a/b``, ``delta_star = 0.2 L`` and a candidate
    margin of ``0.25 a/b`` above the constant state.  On the L = 1 branch the
    window of half-width ``delta_star / 2 = 0.1 L`` holds an oscillation of
    about 0.49 at chi = 20 but only 0.16 at chi = 13.5, on both dx = 0.01 and
    0.02; a 0.05 L window is narrower than the boundary layer and its value
    depends on the grid.
    Candidates are the local maximisers of the last profile; the tail is the
    last half of the family.
    """
    chis, profiles = _family(family, grid)
    ub = params.u_const
    sigma_star = SIGMA_FRACTION * ub if sigma_star is None else sigma_star
    delta_star = DELTA_FRACTION * grid.L if delta_star is None else delta_star
    margin = MARGIN_FRACTION * ub if margin is None else margin
    deltas = tuple(delta_star * f for f in DELTA_LADDER)

    last = profiles[-1]
    cand = [int(i) for i in local_maxima(last, grid) if last[i] > ub + margin]
    tail_start = len(profiles) // 2
    tail = list(zip(chis[tail_start:], profiles[tail_start:]))

    points, table = [], []
    for i in cand:
        x = float(grid.nodes[i])
        osc = {}
        for d in deltas:
            vals = []
            for c, u in tail:
                o = window_oscillation(u, x, max(d, grid.dx), grid)
                vals.append(o)
                table.append((c, x, d, o))
            osc[d] = min(vals)
        points.append(SpikyPoint(x, osc, all(o >= sigma_star for o in osc.values())))
    return SpikeReport(
        [p for p in points if p.spiky], points, sigma_star, delta_star, deltas, margin, chis, table
    )


@dataclass
class ClauseResult:
    clause: str
    passed: bool
    slack: float
    note: str = ""


@dataclass
class AuditRecord:
    clauses: list
    delta_emp: float  # min v / int u

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def get(self, name: str) -> ClauseResult:
        for c in self.clauses:
            if c.clause == name:
                return c
        raise KeyError(name)


def _is_monotone(u, tol=0.0):
    d = np.diff(u)
    if np.all(d >= -tol):
        return 1
    if np.all(d <= tol):
        return -1
    return 0


def theorem42_audit(u, params: Params, grid: Grid1D, v=None, slope_slack: float = LOG_SLOPE_SLACK,
                    identity_tol: float = IDENTITY_TOL) -> AuditRecord:
    """Check the stationary-solution bounds on a nonconstant profile.

    Clauses: ``log-slope`` (max |v_x/v| <= sqrt(mu) + slack), ``v-lower``
    (reports the empirical ratio min v / int u; passes when positive),
    ``bounds`` (inf u < a/b < sup u, int u < aL/b, int u^2 < a^2 L/b^2),
    ``identity`` (int u^2 = (a/b) int u within ``identity_tol``, relative to
    int u^2) and ``monotone`` (monotone u gives strictly monotone v).
    """
    u = check_profile(u, grid, "u").copy()
    if u.max() - u.min() <= 1e-6:
        raise ValueError("audit needs a nonconstant profile (sup - inf > 1e-6)")
    ab = params.a / params.b
    L = grid.L
    v = solve_chemical(u, params, grid) if v is None else check_profile(v, grid, "v")
    out = []

    if np.any(v <= 0):
        out.append(ClauseResult("log-slope", False, -math.inf, "v not positive"))
    else:
        vx = np.gradient(v, grid.dx)
        vx[0] = vx[-1] = 0.0
        slope = float(np.max(np.abs(vx / v)))
        bound = math.sqrt(params.mu) + slope_slack
        out.append(ClauseResult("log-slope", slope <= bound, bound - slope))

    mass = grid.integrate(u)
    delta_emp = float(v.min() / mass)
    out.append(ClauseResult("v-lower", delta_emp > 0, delta_emp, "empirical min v / int u"))

    m2 = grid.integrate(u * u)
    slacks = [u.max() - ab, ab - u.min(), ab * L - mass, ab * ab * L - m2]
    out.append(ClauseResult("bounds", min(slacks) > 0, float(min(slacks))))

    ident = abs(m2 - ab * mass) / max(m2, 1e-300)
    out.append(ClauseResult("identity", ident <= identity_tol, identity_tol - ident))

    mono = _is_monotone(u)
    if mono == 0:
        out.append(ClauseResult("monotone", True, math.inf, "u not monotone; clause vacuous"))
    else:
        dv = mono * np.diff(v)
        out.append(ClauseResult("monotone", bool(np.all(dv > 0)), float(dv.min())))
    return AuditRecord(out, delta_emp)


@dataclass
class FlatteningReport:
    x_star: float
    chis: list
    ubar: list  # median over the far sub-interval, per family member
    decreasing: bool
    bounded: bool  # every ubar <= a/b + tol
    mid: list  # u at x = L/2, per family member

    @property
    def final(self) -> float:
        return self.ubar[-1]


def flattening_check(family, x_star: float, grid: Grid1D, params: Params, tol: float = 1e-6,
                     min_size: int = 2) -> FlatteningReport:
    """Interior level away from a spiky point: median of ``u`` at distance >= 0.2 L."""
    chis, profiles = _family(family, grid, min_size)
    far = np.abs(grid.nodes - x_star) >= 0.2 * grid.L - 1e-12 * grid.L
    if not np.any(far):
        raise ValueError("no nodes at distance >= 0.2 L from x_star")
    ubar = [float(np.median(u[far])) for u in profiles]
    dec = all(b2 <= b1 + tol for b1, b2 in zip(ubar, ubar[1:]))
    bounded = all(b <= params.u_const + tol for b in ubar)
    mid = [float(np.interp(0.5 * grid.L, grid.nodes, u)) for u in profiles]
    return FlatteningReport(float(x_star), chis, ubar, dec, bounded, mid)
