"""Steady states by damped Newton and continuation of branches in chi.

The steady residual is the semi-discrete right-hand side of the integrator
(one code path).  Jacobians are dense forward differences taken through the
elliptic solve; at desk-scale grids (N <= ~600) that is cheap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .bifurcation import pitchfork_coefficients, local_branch_profile
from .integrator import _rhs_kernel, rhs
from .model import Grid1D, Params, check_profile

log = logging.getLogger(__name__)

STABILITY_MARGIN = 1e-8


class NewtonFailure(RuntimeError):
    def __init__(self, msg, u=None, residual=math.inf, iters=0):
        super().__init__(msg)
        self.u = u
        self.residual = residual
        self.iters = iters


class SeedingError(ValueError):
    pass


def steady_residual(u, params: Params, grid: Grid1D) -> np.ndarray:
    return rhs(u, params, grid)


@njit(cache=True)
def _fd_jacobian(u, chi, a, b, mu, nu, dx, rel, scale):
    n = u.shape[0]
    f0 = _rhs_kernel(u, chi, a, b, mu, nu, dx)
    J = np.empty((n, n))
    for j in range(n):
        h = rel * max(abs(u[j]), scale)
        up = u.copy()
        up[j] += h
        J[:, j] = (_rhs_kernel(up, chi, a, b, mu, nu, dx) - f0) / h
    return J


def jacobian(u, params: Params, grid: Grid1D, rel: float = 1e-7) -> np.ndarray:
    """Dense forward-difference Jacobian of the steady residual."""
    u = check_profile(u, grid, "u")
    p = params
    return _fd_jacobian(u, p.chi, p.a, p.b, p.mu, p.nu, grid.dx, rel, p.u_const)


def _chi_derivative(u, params: Params, grid: Grid1D) -> np.ndarray:
    h = 1e-6 * max(1.0, params.chi)
    return (rhs(u, params.with_chi(params.chi + h), grid) - rhs(u, params, grid)) / h


def residual_floor(u, grid: Grid1D) -> float:
    """Rounding level of the residual: the diffusion stencil amplifies
    ``eps * max u`` by ``1/dx**2``."""
    return 32 * np.finfo(float).eps * float(np.max(np.abs(u))) / grid.dx**2


def newton_solve(u_guess, params: Params, grid: Grid1D, tol: float = 1e-10, max_iters: int = 25,
                 max_halvings: int = 8, return_info: bool = False):
    """Damped Newton on the steady residual.

    Backtracks by halving the step (at most ``max_halvings`` times) until the
    sup-norm residual decreases and the iterate stays nonnegative.  ``tol`` is
    raised to :func:`residual_floor` on fine grids where it is unreachable.
    """
    u = check_profile(u_guess, grid, "u_guess").copy()
    if grid.integrate(u) <= 0 or np.any(u < 0):
        raise ValueError("Newton guess must be nonnegative with positive mass")
    tol = max(tol, residual_floor(u, grid))
    r = rhs(u, params, grid)
    res = float(np.max(np.abs(r)))
    it = 0
    while res >= tol:
        if it >= max_iters:
            raise NewtonFailure(f"no convergence after {max_iters} iterations (residual {res:.3g})",
                                u, res, it)
        J = jacobian(u, params, grid)
        try:
            du = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonFailure(f"singular Jacobian at iteration {it}", u, res, it) from exc
        it += 1
        step = 1.0
        for _ in range(max_halvings + 1):
            trial = u + step * du
            if np.all(trial >= 0) and np.all(np.isfinite(trial)):
                r_trial = _rhs_kernel(trial, params.chi, params.a, params.b, params.mu, params.nu, grid.dx)
                res_trial = float(np.max(np.abs(r_trial)))
                if res_trial < res or (step == 1.0 and res_trial < 1e3 * tol):
                    break
            step *= 0.5
        else:
            raise NewtonFailure(f"line search failed at iteration {it} (residual {res:.3g})", u, res, it)
        u, r, res = trial, r_trial, res_trial
    if return_info:
        return u, it, res
    return u


def assess_stability(u_steady, params: Params, grid: Grid1D, n_eigs: int = 5):
    """Leading eigenvalues (by real part) of the linearized dynamics.

    Returns ``(eigs, stable)`` with ``stable`` iff the largest real part is
    below ``-1e-8``.
    """
    J = jacobian(u_steady, params, grid)
    try:
        ev = np.linalg.eigvals(J)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigenvalue solver failed: {exc}") from exc
    ev = ev[np.argsort(-ev.real)][:n_eigs]
    return ev, bool(ev[0].real < -STABILITY_MARGIN)


@dataclass
class BranchPoint:
    chi: float
    u: np.ndarray
    u_at_0: float
    u_at_L: float
    sup_u: float
    inf_u: float
    mass: float
    leading_eig: float
    stable: bool
    newton_iters: int
    residual: float
    segment: int = 0

    @property
    def stability(self) -> str:
        return "stable" if self.stable else "unstable"


@dataclass
class Branch:
    points: list = field(default_factory=list)
    origin: tuple = (1, 1)
    terminated_by: str = ""
    fold_chi: float | None = None

    @property
    def chis(self) -> np.ndarray:
        return np.array([p.chi for p in self.points])


def make_point(u, params: Params, grid: Grid1D, iters: int = 0, segment: int = 0,
               assess: bool = True) -> BranchPoint:
    res = float(np.max(np.abs(rhs(u, params, grid))))
    if assess:
        ev, stable = assess_stability(u, params, grid, n_eigs=1)
        lead = float(ev[0].real)
    else:
        lead, stable = math.nan, False
    return BranchPoint(float(params.chi), u, float(u[0]), float(u[-1]), float(u.max()), float(u.min()),
                       grid.integrate(u), lead, stable, iters, res, segment)


def _is_constant(u, tol=1e-6):
    return float(u.max() - u.min()) < tol


def _arclength_step(u0, chi0, tu, tchi, ds, params: Params, grid: Grid1D, tol: float = 1e-10,
                    max_iters: int = 25):
    """Pseudo-arclength corrector from (u0, chi0) along the unit tangent (tu, tchi).

    The tangent is normalized in the weighted norm ``sum(w u**2)/L + chi**2``.
    """
    w = grid.weights / grid.L
    u = u0 + ds * tu
    chi = chi0 + ds * tchi
    for it in range(1, max_iters + 1):
        if np.any(u < 0):
            raise NewtonFailure("arclength iterate lost positivity")
        p = params.with_chi(chi)
        F = rhs(u, p, grid)
        g = float(np.dot(w * tu, u - u0) + tchi * (chi - chi0) - ds)
        if max(np.max(np.abs(F)), abs(g)) < tol and it > 1:
            return u, chi, it
        J = jacobian(u, p, grid)
        Fc = _chi_derivative(u, p, grid)
        n = grid.n_points
        A = np.empty((n + 1, n + 1))
        A[:n, :n] = J
        A[:n, n] = Fc
        A[n, :n] = w * tu
        A[n, n] = tchi
        d = np.linalg.solve(A, -np.concatenate([F, [g]]))
        u = u + d[:n]
        chi = chi + d[n]
    p = params.with_chi(chi)
    if np.max(np.abs(rhs(u, p, grid))) < tol:
        return u, chi, max_iters
    raise NewtonFailure("arclength corrector did not converge")


def _tangent(u1, chi1, u0, chi0, grid):
    w = grid.weights / grid.L
    du, dchi = u1 - u0, chi1 - chi0
    norm = math.sqrt(float(np.dot(w, du * du)) + dchi * dchi)
    return du / norm, dchi / norm, norm


def trace_branch(k0: int, sign: int, chi_range, dchi: float, params: Params, grid: Grid1D,
                 dchi_min: float | None = None, chi_after_fold: float | None = None,
                 assess: bool = True, max_points: int = 2000) -> Branch:
    """Continue the local pitchfork branch ``(k0, sign)`` from ``chi_range[0]``
    toward ``chi_range[1]``.

    Natural continuation with a secant predictor; on Newton failure the step
    is halved down to ``dchi_min``.  When the step cannot shrink further, a
    short pseudo-arclength walk looks for a turning point in chi; if chi turns
    the branch is flagged ``fold-detected``, otherwise ``newton-failure``.
    With ``chi_after_fold`` set, the walk's points past the turn are kept and
    natural continuation resumes in the reversed direction up to that value.
    """
    chi_start, chi_stop = map(float, chi_range)
    direction = 1.0 if chi_stop >= chi_start else -1.0
    dchi = abs(dchi)
    dchi_min = dchi * 2.0**-6 if dchi_min is None else abs(dchi_min)
    pd = pitchfork_coefficients(k0, params)
    branch = Branch(origin=(k0, sign))

    if pd.radicand(chi_start) < 0:
        raise SeedingError(
            f"no local {pd.direction} branch at chi={chi_start} (threshold {pd.chi_k0_star:.6g})")
    p = params.with_chi(chi_start)
    seed = local_branch_profile(pd, chi_start, sign, grid)
    try:
        u, it, _ = newton_solve(seed, p, grid, return_info=True)
    except NewtonFailure as exc:
        raise SeedingError(f"Newton failed from the local seed at chi={chi_start}: {exc}") from exc
    branch.points.append(make_point(u, p, grid, it, 0, assess))

    segment = 0
    # amplitude grows like sqrt(chi - chi*): keep the first step comparable to
    # the seed's distance from the threshold
    step = min(dchi, max(abs(chi_start - pd.chi_k0_star), dchi_min))
    target = chi_stop
    while len(branch.points) < max_points:
        last = branch.points[-1]
        if direction * (target - last.chi) <= 1e-12:
            branch.terminated_by = "reached-chi-max"
            return branch
        # stay on the lattice chi_start + n * dchi whenever the step allows
        n_done = math.floor(direction * (last.chi - chi_start) / dchi + 1e-9)
        next_node = chi_start + direction * dchi * (n_done + 1)
        h = min(step, abs(target - last.chi), abs(next_node - last.chi))
        chi_new = last.chi + direction * h
        guess = _predict(branch, segment, chi_new, pd, sign, grid)
        p = params.with_chi(chi_new)
        try:
            u, it, _ = newton_solve(guess, p, grid, return_info=True)
            if _is_constant(u) and not _is_constant(last.u):
                raise NewtonFailure("collapsed onto the constant solution")
            if _mode_coefficient(u, k0, grid) * _mode_coefficient(last.u, k0, grid) < 0:
                raise NewtonFailure("jumped to the mirror branch")
        except (NewtonFailure, ValueError, FloatingPointError) as exc:
            log.debug("continuation failure at chi=%g: %s", chi_new, exc)
            if step / 2 >= dchi_min:
                step /= 2
                continue
            fold = _walk_fold(branch, segment, direction, params, grid, dchi, dchi_min,
                              keep=3, assess=assess)
            if fold is None:
                branch.terminated_by = "newton-failure"
                return branch
            branch.fold_chi = fold[0]
            if chi_after_fold is None or segment > 0 or not fold[1]:
                branch.terminated_by = "fold-detected"
                return branch
            new_points = fold[1]
            segment += 1
            branch.points.extend(new_points)
            direction = -direction
            target = float(chi_after_fold)
            step = dchi
            continue
        branch.points.append(make_point(u, p, grid, it, segment, assess))
        if h == step and step < dchi:
            step = min(2 * step, dchi)
    branch.terminated_by = "newton-failure"
    return branch


def _mode_coefficient(u, k, grid: Grid1D) -> float:
    c = np.cos(k * np.pi * grid.nodes / grid.L)
    return float(np.dot(grid.weights, u * c))


def _predict(branch: Branch, segment: int, chi_new: float, pd, sign: int, grid: Grid1D):
    """Secant predictor; from a single seed point, shift by the change of the
    local normal-form profile instead."""
    last = branch.points[-1]
    pts = [q for q in branch.points if q.segment == segment]
    if len(pts) >= 2 and pts[-2].chi != last.chi:
        prev = pts[-2]
        guess = last.u + (last.u - prev.u) * (chi_new - last.chi) / (last.chi - prev.chi)
    elif pd.radicand(chi_new) >= 0 and pd.radicand(last.chi) >= 0:
        guess = last.u + (local_branch_profile(pd, chi_new, sign, grid)
                          - local_branch_profile(pd, last.chi, sign, grid))
    else:
        guess = last.u
    return guess if np.all(guess >= 0) else last.u


def _walk_fold(branch: Branch, segment: int, direction: float, params, grid, ds: float,
               ds_min: float, keep: int, assess: bool, max_steps: int = 400):
    """Pseudo-arclength walk from the last two points of ``segment``.

    Returns ``(fold_chi, points)`` once chi has reversed direction, with up to
    ``keep`` points collected past the turn, or ``None`` when the walk fails
    before turning.
    """
    pts = [q for q in branch.points if q.segment == segment]
    if len(pts) < 2:
        return None
    a, b = pts[-2], pts[-1]
    tu, tchi, _ = _tangent(b.u, b.chi, a.u, a.chi, grid)
    u_prev, chi_prev = b.u, b.chi
    extreme = b.chi
    out = []
    turned = False
    for _ in range(max_steps):
        try:
            u, chi, it = _arclength_step(u_prev, chi_prev, tu, tchi, ds, params, grid)
        except (NewtonFailure, np.linalg.LinAlgError, ValueError, FloatingPointError):
            if ds / 2 < ds_min:
                return (extreme, out) if turned else None
            ds /= 2
            continue
        tu, tchi, _ = _tangent(u, chi, u_prev, chi_prev, grid)
        if direction * (chi - chi_prev) < 0:
            turned = True
        else:
            extreme = chi
        if turned:
            out.append(make_point(u, params.with_chi(chi), grid, it, segment + 1, assess))
            if len(out) >= keep:
                return extreme, out
        u_prev, chi_prev = u, chi
    return (extreme, out) if turned else None


def solve_at(branch: Branch, chi: float, params: Params, grid: Grid1D, segment: int | None = None,
             assess: bool = True, max_depth: int = 6) -> BranchPoint:
    """Steady state at an exact ``chi`` off the branch lattice.

    Newton from the closest branch point (optionally restricted to one
    segment), shifted along the secant to its neighbour when one exists.  If
    that fails, the unshifted profile is tried, then the gap is bisected and
    crossed in smaller natural-continuation steps.
    """
    pts = [q for q in branch.points if segment is None or q.segment == segment]
    if not pts:
        raise ValueError("branch has no points on the requested segment")
    i = int(np.argmin([abs(q.chi - chi) for q in pts]))
    near = pts[i]
    guesses = []
    j = i + 1 if i + 1 < len(pts) else i - 1
    if 0 <= j < len(pts) and pts[j].chi != near.chi and pts[j].segment == near.segment:
        g = near.u + (pts[j].u - near.u) * (chi - near.chi) / (pts[j].chi - near.chi)
        if np.all(g >= 0):
            guesses.append(g)
    guesses.append(near.u)
    u = _bisect_to(near.u, near.chi, chi, guesses, params, grid, max_depth)
    p = params.with_chi(chi)
    return make_point(u, p, grid, 0, near.segment, assess)


def _bisect_to(u0, chi0, chi, guesses, params, grid, depth):
    p = params.with_chi(chi)
    for g in guesses:
        try:
            return newton_solve(g, p, grid)
        except NewtonFailure:
            pass
    if depth == 0:
        raise NewtonFailure(f"could not reach chi={chi} from chi={chi0}")
    mid = 0.5 * (chi0 + chi)
    um = _bisect_to(u0, chi0, mid, [u0], params, grid, depth - 1)
    return _bisect_to(um, mid, chi, [um], params, grid, depth - 1)
