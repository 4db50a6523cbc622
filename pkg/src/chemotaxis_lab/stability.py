"""Linear stability of the constant state (a/b, nu a / (mu b)).

Cosine mode ``k`` of a perturbation grows at rate ``lambda_k``; it becomes
unstable once ``chi`` exceeds ``chi_k_star``.  The constant state loses
stability at ``chi_star = min_k chi_k_star``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import Params

PI2 = math.pi**2


def lambda_k(k: int, chi: float, a: float, mu: float, L: float) -> float:
    """Growth rate of the k-th cosine mode at the constant state."""
    if k < 0:
        raise ValueError("mode index must be nonnegative")
    kk = k * k * PI2
    return -(kk + a * L * L) / (L * L) + chi * mu * kk / (mu * L * L + kk)


def chi_k_star(k: int, a: float, mu: float, L: float) -> float:
    """Sensitivity at which ``lambda_k`` crosses zero (k >= 1)."""
    if k < 1:
        raise ValueError("chi_k_star is defined for k >= 1")
    kk = k * k * PI2
    return (mu * L * L + kk) / (kk * L * L) * (kk + a * L * L) / mu


def regular_chi_k_star(k: int, a: float, b: float, mu: float, nu: float, L: float) -> float:
    """Threshold of the regular-sensitivity model (flux ``chi u v_x``)."""
    if k < 1:
        raise ValueError("regular_chi_k_star is defined for k >= 1")
    kk = k * k * PI2
    return (mu * L * L + kk) / (kk * L * L) * b * (kk + a * L * L) / (a * nu)


def k_star_floor(a: float, mu: float, L: float) -> int:
    """Greatest integer not exceeding ``(L/pi) (a mu)^(1/4)``."""
    return int(math.floor(L / math.pi * (a * mu) ** 0.25))


def chi_star(a: float, mu: float, L: float, K_max: int = 64, return_tie: bool = False):
    """Minimum of ``chi_k_star`` over k = 1..K_max and its argmin.

    Ties go to the smaller k; pass ``return_tie=True`` to also get a flag
    saying whether the minimum was attained at two consecutive modes.
    """
    values = np.array([chi_k_star(k, a, mu, L) for k in range(1, K_max + 1)])
    i = int(np.argmin(values))
    k = i + 1
    if k == K_max:
        warnings.warn(f"chi_star minimum sits at the bracket end K_max={K_max}", RuntimeWarning)
    value = float(values[i])
    tie = bool(i + 1 < len(values) and math.isclose(values[i + 1], value, rel_tol=1e-12))
    if return_tie:
        return value, k, tie
    return value, k


def chi_star_explicit(a: float, mu: float, L: float) -> float:
    """Closed-form three-case evaluation of the critical sensitivity."""
    root = L / math.pi * (a * mu) ** 0.25
    ks = k_star_floor(a, mu, L)
    if ks == 0:
        return chi_k_star(1, a, mu, L)
    if ks == root:
        return chi_k_star(ks, a, mu, L)
    return min(chi_k_star(ks, a, mu, L), chi_k_star(ks + 1, a, mu, L))


def chi_star_bounds(a: float, mu: float, L: float) -> tuple[float, float]:
    low = (1.0 + math.sqrt(a / mu)) ** 2
    return low, low + PI2 / (mu * L * L) + a * L * L / PI2


@dataclass(frozen=True)
class StabilityReport:
    lambdas: np.ndarray  # k = 0..K_max
    chi_stars: np.ndarray  # k = 1..K_max
    chi_star: float
    k_star_index: int
    k_star_floor: int
    verdict: str
    tie: bool = False


def analyze(params: Params, K_max: int = 64) -> StabilityReport:
    a, mu, L = params.a, params.mu, params.L
    lambdas = np.array([lambda_k(k, params.chi, a, mu, L) for k in range(K_max + 1)])
    chis = np.array([chi_k_star(k, a, mu, L) for k in range(1, K_max + 1)])
    cs, k, tie = chi_star(a, mu, L, K_max, return_tie=True)
    if params.chi < cs:
        verdict = "stable"
    elif params.chi > cs:
        verdict = "unstable"
    else:
        verdict = "critical"
    return StabilityReport(lambdas, chis, cs, k, k_star_floor(a, mu, L), verdict, tie)
