"""Pitchfork coefficients of the center-manifold reduction at ``chi_k0_star``.

On the center manifold the critical amplitude obeys
``du/dt = alpha (chi - chi_k0_star) u - beta u**3``; the slaved modes are
``u_0 = a0 u**2`` and ``u_2k0 = a2k0 u**2`` to second order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import Grid1D, Params
from .stability import chi_k_star, lambda_k

BETA_DEADBAND = 1e-10


class DegenerateBifurcation(ValueError):
    """The generic pitchfork conditions fail (``lambda_2k0 = 0`` or ``beta ~ 0``)."""


@dataclass(frozen=True)
class PitchforkData:
    k0: int
    chi_k0_star: float
    a0: float
    a2k0: float
    alpha_k0: float
    beta_k0: float
    params: Params

    @property
    def direction(self) -> str:
        return "supercritical" if self.beta_k0 > 0 else "subcritical"

    def radicand(self, chi: float) -> float:
        return self.alpha_k0 * (chi - self.chi_k0_star) / self.beta_k0

    def amplitude(self, chi: float) -> float:
        """Leading-order amplitude ``sqrt(alpha (chi - chi*) / beta)``."""
        r = self.radicand(chi)
        if r < 0:
            raise ValueError(
                f"chi={chi} is on the wrong side of a {self.direction} bifurcation at {self.chi_k0_star}"
            )
        return math.sqrt(r)

    amplitude_fn = amplitude

    def branch_side(self) -> int:
        """+1 if local branches exist for chi > chi*, -1 otherwise."""
        return 1 if self.beta_k0 > 0 else -1


def second_harmonic_coefficient(k0: int, params: Params) -> float:
    a, b, mu, L = params.a, params.b, params.mu, params.L
    cs = chi_k_star(k0, a, mu, L)
    lam2 = lambda_k(2 * k0, cs, a, mu, L)
    if lam2 == 0:
        raise DegenerateBifurcation(f"lambda_{2 * k0} vanishes at chi_{k0}*")
    P = mu * L * L + k0 * k0 * math.pi**2
    return (b / 2 - cs * mu * b * k0**4 * math.pi**4 / (a * P * P)) / lam2


def pitchfork_coefficients(k0: int, params: Params) -> PitchforkData:
    """Normal-form data at the k0-th threshold (``params.chi`` is ignored)."""
    if k0 < 1:
        raise ValueError("k0 must be >= 1")
    a, b, mu, nu, L = params.a, params.b, params.mu, params.nu, params.L
    cs = chi_k_star(k0, a, mu, L)
    pi4 = math.pi**4
    P = mu * L * L + k0 * k0 * math.pi**2
    Q = mu * L * L + 4 * k0 * k0 * math.pi**2
    a0 = -b / (2 * a)
    a2 = second_harmonic_coefficient(k0, params)
    alpha = mu * k0 * k0 * math.pi**2 / P
    beta = b * (
        2 * a0
        + a2
        + cs * mu * k0**4 * pi4 / (nu * a * P * Q) * a2
        + cs * mu * mu * b * k0**4 * pi4 * L * L / (4 * a * a * P**3)
    )
    if abs(beta) < BETA_DEADBAND:
        raise DegenerateBifurcation(f"cubic coefficient {beta:g} inside the dead-band")
    return PitchforkData(k0, cs, a0, a2, alpha, beta, params)


def local_branch_profile(pd: PitchforkData, chi: float, sign: int, grid: Grid1D) -> np.ndarray:
    """Second-order approximation of the bifurcating steady state.

    ``a/b + s A cos(k0 pi x/L) + A**2 (a0 + a2k0 cos(2 k0 pi x/L))`` with
    ``A = sqrt(alpha (chi - chi*) / beta)`` and ``s = sign``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    amp = pd.amplitude(chi)
    p = pd.params
    if amp > 0.5 * p.u_const:
        warnings.warn(f"local amplitude {amp:.3g} is large; the expansion may be poor", RuntimeWarning)
    theta = pd.k0 * np.pi * grid.nodes / grid.L
    return p.u_const + sign * amp * np.cos(theta) + amp**2 * (pd.a0 + pd.a2k0 * np.cos(2 * theta))


def reduced_ode_rhs(u_k0: float, chi_tilde: float, pd: PitchforkData) -> float:
    return pd.alpha_k0 * chi_tilde * u_k0 - pd.beta_k0 * u_k0**3
