"""Shared model types, the uniform node grid, and cosine-mode transforms.

Profiles (nodal values of u or v) and mode vectors (cosine coefficients
``c_0 .. c_K`` of ``cos(k pi x / L)``) are plain float arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Params:
    """Physical constants of the chemotaxis model and the domain length.

    ``chi`` chemotactic sensitivity, ``a`` growth rate, ``b`` self-limitation,
    ``mu`` chemical degradation, ``nu`` chemical production, ``L`` length.
    """

    chi: float
    a: float = 1.0
    b: float = 1.0
    mu: float = 1.0
    nu: float = 1.0
    L: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"parameter {f.name} must be positive and finite, got {value!r}")

    @property
    def u_const(self) -> float:
        """The constant steady state a/b."""
        return self.a / self.b

    @property
    def v_const(self) -> float:
        return self.nu / self.mu * self.a / self.b

    def with_chi(self, chi: float) -> "Params":
        return Params(chi, self.a, self.b, self.mu, self.nu, self.L)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Grid1D:
    """Vertex-centered uniform grid on [0, L] including both endpoints."""

    L: float
    n_points: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"domain length must be positive, got {self.L!r}")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValueError(f"n_points must be an integer >= 3, got {self.n_points!r}")
        nodes = np.linspace(0.0, self.L, int(self.n_points))
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def dx(self) -> float:
        return self.L / (self.n_points - 1)

    @property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.n_points, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def make_grid(L: float, n_points: int) -> Grid1D:
    return Grid1D(float(L), int(n_points))


def grid_for_spacing(L: float, dx: float) -> Grid1D:
    """Grid whose spacing is ``dx`` (L must be a multiple of dx up to rounding)."""
    n = int(round(L / dx)) + 1
    return make_grid(L, n)


def check_profile(values, grid: Grid1D, name: str = "profile") -> np.ndarray:
    """Validate a nodal profile against ``grid`` and return it as a float array."""
    p = np.asarray(values, dtype=float)
    if p.shape != (grid.n_points,):
        raise ValueError(f"{name} has shape {p.shape}, grid expects ({grid.n_points},)")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} contains non-finite values")
    return p


def cosine_matrix(grid: Grid1D, K: int) -> np.ndarray:
    """``C[k, i] = cos(k pi x_i / L)`` for k = 0..K."""
    k = np.arange(K + 1)[:, None]
    return np.cos(k * np.pi * grid.nodes[None, :] / grid.L)


def project_to_modes(p, grid: Grid1D, K: int) -> np.ndarray:
    """Cosine coefficients of ``p`` by trapezoid quadrature.

    ``c_0`` is the mean, ``c_k = (2/L) int p cos(k pi x/L) dx`` for k >= 1.
    """
    if K < 0 or K + 1 > grid.n_points:
        raise ValueError(f"truncation K={K} under-resolved on {grid.n_points} nodes")
    p = check_profile(p, grid)
    coeffs = cosine_matrix(grid, K) @ (grid.weights * p) * (2.0 / grid.L)
    coeffs[0] *= 0.5
    return coeffs


def synthesize_profile(coeffs, grid: Grid1D) -> np.ndarray:
    m = np.asarray(coeffs, dtype=float)
    if m.ndim != 1 or m.size == 0 or not np.all(np.isfinite(m)):
        raise ValueError("mode vector must be a non-empty finite 1-D array")
    return m @ cosine_matrix(grid, m.size - 1)


def cosine_profile(grid: Grid1D, const: float, amp: float = 0.0, k: int = 1) -> np.ndarray:
    """``const + amp * cos(k pi x / L)`` sampled on ``grid``."""
    return const + amp * np.cos(k * np.pi * grid.nodes / grid.L)


def reflect(p) -> np.ndarray:
    """Profile reflected about the domain midpoint, ``p(L - x)``."""
    return np.asarray(p, dtype=float)[::-1].copy()


def write_profile_csv(path, grid: Grid1D, values, header: str = "value", comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["x", header])
        for x, val in zip(grid.nodes, values):
            w.writerow([repr(float(x)), repr(float(val))])


def read_profile_csv(path) -> tuple[np.ndarray, np.ndarray]:
    rows = [r for r in csv.reader(_strip_comments(path))]
    data = np.array([[float(c) for c in r] for r in rows[1:]])
    return data[:, 0], data[:, 1]


def write_modes_csv(path, coeffs, comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["k", "coeff"])
        for k, c in enumerate(coeffs):
            w.writerow([k, repr(float(c))])


def read_modes_csv(path) -> np.ndarray:
    rows = [r for r in csv.reader(_strip_comments(path))]
    return np.array([float(r[1]) for r in rows[1:]])


def _strip_comments(path):
    return [line for line in Path(path).read_text().splitlines() if line and not line.startswith("#")]


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def write_table(path, header, rows, comment: str | None = None):
    """Long-format CSV: optional ``# comment`` line, header row, data rows."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(list(header))
        for r in rows:
            w.writerow([_cell(v) for v in r])


def read_table(path) -> tuple[list, list]:
    """Header and rows (strings) of a CSV written by :func:`write_table`."""
    rows = [r for r in csv.reader(_strip_comments(path))]
    return rows[0], rows[1:]
