"""Method-of-lines simulation of the parabolic-elliptic chemotaxis model.

Space: conservative finite volumes on the node grid with half cells at both
endpoints.  The face flux is

    F_{i+1/2} = (u_{i+1} - u_i)/dx - chi * ubar * (v_{i+1} - v_i) / (dx * vbar)

with arithmetic face averages ``ubar``, ``vbar`` and ``F = 0`` on the two
boundary faces.  Time: classical RK4, re-solving ``v`` at every stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .elliptic import _chemical_into, _chemical_kernel
from .model import Grid1D, Params, check_profile, reflect


class SimulationBlowup(FloatingPointError):
    """Raised when the solution turns non-finite or negative."""

    def __init__(self, t: float, max_u: float, reason: str):
        super().__init__(f"{reason} at t={t:.6g} (max u = {max_u:.6g})")
        self.t = t
        self.max_u = max_u


@njit(cache=True)
def _rhs_into(u, chi, a, b, mu, nu, dx, cp, v, out):
    """Right-hand side into ``out``; ``cp`` and ``v`` are scratch."""
    _chemical_into(u, mu, nu, dx, cp, v)
    n = u.shape[0]
    f_left = 0.0
    for i in range(n - 1):
        ubar = 0.5 * (u[i] + u[i + 1])
        vbar = 0.5 * (v[i] + v[i + 1])
        f = (u[i + 1] - u[i]) / dx - chi * ubar * (v[i + 1] - v[i]) / (dx * vbar)
        out[i] = (f - f_left) / dx
        f_left = f
    out[n - 1] = -f_left / dx
    out[0] *= 2.0
    out[n - 1] *= 2.0
    for i in range(n):
        out[i] += u[i] * (a - b * u[i])


@njit(cache=True)
def _rhs_kernel(u, chi, a, b, mu, nu, dx):
    n = u.shape[0]
    out = np.empty(n)
    _rhs_into(u, chi, a, b, mu, nu, dx, np.empty(n), np.empty(n), out)
    return out


@njit(cache=True)
def _advance_kernel(u, nsteps, chi, a, b, mu, nu, dx, dt):
    """Take up to ``nsteps`` RK4 steps; returns (u, steps_done, ok)."""
    n = u.shape[0]
    u = u.copy()
    cp, v, w = np.empty(n), np.empty(n), np.empty(n)
    k1, k2, k3, k4 = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    for s in range(nsteps):
        _rhs_into(u, chi, a, b, mu, nu, dx, cp, v, k1)
        for i in range(n):
            w[i] = u[i] + 0.5 * dt * k1[i]
        _rhs_into(w, chi, a, b, mu, nu, dx, cp, v, k2)
        for i in range(n):
            w[i] = u[i] + 0.5 * dt * k2[i]
        _rhs_into(w, chi, a, b, mu, nu, dx, cp, v, k3)
        for i in range(n):
            w[i] = u[i] + dt * k3[i]
        _rhs_into(w, chi, a, b, mu, nu, dx, cp, v, k4)
        ok = True
        for i in range(n):
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not (u[i] >= 0.0) or not math.isfinite(u[i]):
                ok = False
        if not ok:
            return u, s + 1, False
    return u, nsteps, True


def _check_positive_mass(u, grid):
    if np.any(u < 0):
        raise ValueError("cell density must be nonnegative")
    if grid.integrate(u) <= 0:
        raise ValueError("cell density must have positive mass")


def rhs(u, params: Params, grid: Grid1D) -> np.ndarray:
    """Semi-discrete time derivative ``du/dt`` at every node."""
    u = check_profile(u, grid, "u")
    _check_positive_mass(u, grid)
    p = params
    out = _rhs_kernel(u, p.chi, p.a, p.b, p.mu, p.nu, grid.dx)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("right-hand side is not finite (is v positive?)")
    return out


def step_rk4(u, params: Params, grid: Grid1D, dt: float, t: float = 0.0) -> np.ndarray:
    u = check_profile(u, grid, "u")
    _check_positive_mass(u, grid)
    p = params
    new, _, _ = _advance_kernel(u, 1, p.chi, p.a, p.b, p.mu, p.nu, grid.dx, dt)
    if not np.all(np.isfinite(new)):
        raise SimulationBlowup(t + dt, float(np.nanmax(np.abs(new))), "non-finite density")
    if np.any(new < 0):
        raise SimulationBlowup(t + dt, float(new.max()), "negative density")
    return new


@dataclass(frozen=True)
class SimConfig:
    """Time stepping and output cadence.

    ``steady_tol`` bounds the sup-norm rate ``|u(t + D) - u(t)| / D`` with
    ``D = check_every * dt``.  ``snapshot_every`` is in time units; ``None``
    keeps only the initial and final states.
    """

    t_end: float
    dt: float = 5e-5
    steady_tol: float = 1e-7
    check_every: int = 1000
    snapshot_every: float | None = None
    stop_when_steady: bool = True

    def __post_init__(self):
        if not self.dt > 0 or not self.t_end > 0 or not self.steady_tol > 0:
            raise ValueError("dt, t_end and steady_tol must be positive")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


@dataclass
class SimResult:
    final_u: np.ndarray
    final_v: np.ndarray
    t_final: float
    steady: bool
    snapshots: list = field(default_factory=list)  # (t, u) pairs
    mass_history: list = field(default_factory=list)  # (t, int u) pairs
    last_rate: float = math.inf


def simulate(u0, params: Params, grid: Grid1D, cfg: SimConfig) -> SimResult:
    """Integrate until ``cfg.t_end`` or until the steady-rate test passes."""
    u = check_profile(u0, grid, "u0").copy()
    _check_positive_mass(u, grid)
    p = params
    n_total = int(round(cfg.t_end / cfg.dt))
    done = 0
    snapshots = [(0.0, u.copy())]
    mass = [(0.0, grid.integrate(u))]
    next_snap = cfg.snapshot_every if cfg.snapshot_every else math.inf
    steady = False
    rate = math.inf
    while done < n_total:
        chunk = min(cfg.check_every, n_total - done)
        prev = u
        u, taken, ok = _advance_kernel(u, chunk, p.chi, p.a, p.b, p.mu, p.nu, grid.dx, cfg.dt)
        done += taken
        t = done * cfg.dt
        if not ok:
            bad = "non-finite density" if not np.all(np.isfinite(u)) else "negative density"
            raise SimulationBlowup(t, float(np.nanmax(np.abs(u))), bad)
        mass.append((t, grid.integrate(u)))
        if t >= next_snap - 0.5 * cfg.dt:
            snapshots.append((t, u.copy()))
            next_snap += cfg.snapshot_every
        rate = float(np.max(np.abs(u - prev))) / (taken * cfg.dt)
        if chunk == cfg.check_every and rate < cfg.steady_tol:
            steady = True
            if cfg.stop_when_steady:
                break
    t = done * cfg.dt
    if snapshots[-1][0] != t:
        snapshots.append((t, u.copy()))
    v = _chemical_kernel(u, p.mu, p.nu, grid.dx)
    return SimResult(u, v, t, steady, snapshots, mass, rate)


def mirror_check(u0) -> np.ndarray:
    """Initial profile reflected about the midpoint, ``u0(L - x)``."""
    return reflect(u0)
