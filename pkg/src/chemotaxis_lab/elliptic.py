"""Neumann solve of the chemical equation ``0 = v'' - mu v + nu u``.

Second-order central differences with reflected ghost nodes
(``v_{-1} = v_1``, ``v_N = v_{N-2}``).  The two boundary rows are halved,
which makes the matrix symmetric and gives the discrete mean identity
``mu * int v = nu * int u`` exactly under trapezoid quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import Grid1D, Params, check_profile


@dataclass(frozen=True)
class TridiagonalSystem:
    """Rows ``sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]``.

    ``sub[0]`` and ``sup[-1]`` are ignored.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if not (len(self.sub) == len(self.sup) == len(self.rhs) == n):
            raise ValueError("tridiagonal arrays must share one length")
        if np.any(self.diag == 0):
            raise ValueError("zero on the diagonal")

    def dense(self) -> np.ndarray:
        n = len(self.diag)
        A = np.diag(self.diag)
        A[np.arange(1, n), np.arange(n - 1)] = self.sub[1:]
        A[np.arange(n - 1), np.arange(1, n)] = self.sup[:-1]
        return A

    def residual(self, x) -> np.ndarray:
        r = self.diag * x - self.rhs
        r[1:] += self.sub[1:] * x[:-1]
        r[:-1] += self.sup[:-1] * x[1:]
        return r

    def solve(self) -> np.ndarray:
        return thomas_solve(self.sub, self.diag, self.sup, self.rhs)


@njit(cache=True)
def thomas_solve(sub, diag, sup, rhs):
    """Thomas algorithm; no pivoting, so the system must be diagonally dominant."""
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = sup[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / m
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit(cache=True)
def _chemical_into(u, mu, nu, dx, cp, v):
    """Thomas sweep specialised to the chemical operator; writes ``v``.

    Off-diagonals are all ``-1/dx**2``; the two boundary rows are halved.
    ``cp`` is scratch of the same length.
    """
    n = u.shape[0]
    h2 = 1.0 / (dx * dx)
    off = -h2
    d = h2 + 0.5 * mu
    cp[0] = off / d
    v[0] = 0.5 * nu * u[0] / d
    for i in range(1, n):
        if i < n - 1:
            d = 2.0 * h2 + mu
            r = nu * u[i]
        else:
            d = h2 + 0.5 * mu
            r = 0.5 * nu * u[i]
        m = d - off * cp[i - 1]
        cp[i] = off / m
        v[i] = (r - off * v[i - 1]) / m
    for i in range(n - 2, -1, -1):
        v[i] -= cp[i] * v[i + 1]


@njit(cache=True)
def _chemical_kernel(u, mu, nu, dx):
    n = u.shape[0]
    v = np.empty(n)
    _chemical_into(u, mu, nu, dx, np.empty(n), v)
    return v


def assemble_chemical(u, params: Params, grid: Grid1D) -> TridiagonalSystem:
    u = check_profile(u, grid, "u")
    n, h2 = grid.n_points, 1.0 / grid.dx**2
    sub = np.full(n, -h2)
    sup = np.full(n, -h2)
    diag = np.full(n, 2.0 * h2 + params.mu)
    rhs = params.nu * u.copy()
    diag[[0, -1]] = h2 + 0.5 * params.mu
    rhs[[0, -1]] *= 0.5
    sub[0] = 0.0
    sup[-1] = 0.0
    return TridiagonalSystem(sub, diag, sup, rhs)


def solve_chemical(u, params: Params, grid: Grid1D) -> np.ndarray:
    """Chemical concentration ``v`` slaved to the cell density ``u``."""
    u = check_profile(u, grid, "u")
    v = _chemical_kernel(u, params.mu, params.nu, grid.dx)
    if not np.all(np.isfinite(v)):
        raise FloatingPointError("chemical solve produced non-finite values")
    return v


def log_derivative_bound_check(v, grid: Grid1D, mu: float | None = None) -> float:
    """Largest ``|v_x / v|`` over interior nodes (central differences).

    Stationary solutions satisfy ``|v_x / v| <= sqrt(mu)``; the comparison
    against ``sqrt(mu)`` plus a tolerance is left to the caller.
    """
    v = check_profile(v, grid, "v")
    if np.any(v <= 0):
        raise ValueError("log-derivative requires a strictly positive v")
    vx = (v[2:] - v[:-2]) / (2.0 * grid.dx)
    return float(np.max(np.abs(vx / v[1:-1])))
