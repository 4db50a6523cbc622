"""Truncated cosine-Galerkin system for the deviation ``u - a/b``.

State: coefficients ``u_0 .. u_K`` of ``cos(k pi x/L)``.  The chemical modes
are slaved, ``v_k = nu u_k / (mu + (k pi/L)**2)``.  The singular factor
``1 / v`` is expanded to second order about the constant state, so the
nonlinearity holds quadratic and cubic convolution sums; quartic and higher
terms are dropped.

Index-set sums are over nonnegative indices up to K, e.g.
``sum_{i-j=k} f_i g_j``.  Quadratic sums are formed directly; cubic sums
first collect the pair sums ``sum_{i +/- j = m} f_i g_j`` and then sweep the
third index, which gives the same totals in O(K**2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import Params
from .stability import lambda_k


@dataclass(frozen=True)
class GalerkinState:
    modes: np.ndarray  # deviation coefficients u_0 .. u_K

    @property
    def K(self) -> int:
        return self.modes.size - 1

    def v_modes(self, params: Params) -> np.ndarray:
        return chemical_modes(self.modes, params)


def wavenumbers(K: int, L: float) -> np.ndarray:
    return np.arange(K + 1) * math.pi / L


def chemical_modes(u, params: Params) -> np.ndarray:
    kap = wavenumbers(len(u) - 1, params.L)
    return params.nu * np.asarray(u) / (params.mu + kap**2)


def _pair_sums(f, g):
    """``P[m + K]`` for m in -K..2K: ``sum_{i+j=m}`` (plus) and ``sum_{i-j=m}`` (minus)."""
    K = len(f) - 1
    plus = np.zeros(3 * K + 1)
    plus[K:] = np.convolve(f, g)
    minus = np.zeros(3 * K + 1)
    # correlate(f, g, 'full')[n] = sum_i f[i] g[i - n + K]  ->  i - j = n - K
    minus[: 2 * K + 1] = np.correlate(f, g, "full")
    return plus, minus


def quadratic_sum(f, g, weighted: bool, K_out: int | None = None, kap=None):
    """``sum_{i-j=-k} + sum_{i+j=k} - sum_{i-j=k}`` of ``w_j f_i g_j``.

    With ``weighted`` the weight is ``kap_j``; otherwise the three sets are
    all added with weight one (the reaction-term combination
    ``sum_{i-j=k} + sum_{i-j=-k} + sum_{i+j=k}``).
    """
    K = len(f) - 1
    K_out = K if K_out is None else K_out
    gw = g * kap if weighted else g
    plus, minus = _pair_sums(f, gw)
    k = np.arange(K_out + 1)
    s_plus = plus[K + k]
    s_minus_pos = minus[K + k]  # i - j = k
    s_minus_neg = minus[K - k]  # i - j = -k
    if weighted:
        return s_minus_neg + s_plus - s_minus_pos
    return s_minus_pos + s_minus_neg + s_plus


def cubic_sum(f, g, v, kap):
    """Seven index-set sum of ``kap_l f_i g_j v_l`` for k = 0..K.

    Positive sets: i-j+l, -i-j+l, i+j+l, -i+j+l equal to k.
    Negative sets: -i+j-l, i+j-l, i-j-l equal to k.
    """
    K = len(f) - 1
    plus, minus = _pair_sums(f, g)  # index m + K, m in -K..2K
    s = kap * v  # index l in 0..K
    m = np.arange(-K, 2 * K + 1)
    out = np.zeros(K + 1)
    l = np.arange(K + 1)
    # sum over (m, l) of P(m) s(l) delta(target(m, l) = k)
    for P, sgn_m, sgn_l, sign in (
        (minus, 1, 1, 1.0),    # (i - j) + l
        (plus, -1, 1, 1.0),    # -(i + j) + l
        (plus, 1, 1, 1.0),     # (i + j) + l
        (minus, -1, 1, 1.0),   # -(i - j) + l
        (minus, -1, -1, -1.0), # -(i - j) - l
        (plus, 1, -1, -1.0),   # (i + j) - l
        (minus, 1, -1, -1.0),  # (i - j) - l
    ):
        target = sgn_m * m[:, None] + sgn_l * l[None, :]
        weights = P[:, None] * s[None, :]
        mask = (target >= 0) & (target <= K)
        out += sign * np.bincount(target[mask], weights[mask], minlength=K + 1)[: K + 1]
    return out


@njit(cache=True)
def _pairs(f, g, K):
    plus = np.zeros(3 * K + 1)
    minus = np.zeros(3 * K + 1)
    for i in range(K + 1):
        for j in range(K + 1):
            w = f[i] * g[j]
            plus[K + i + j] += w
            minus[K + i - j] += w
    return plus, minus


@njit(cache=True)
def _cubic_kernel(f, g, s, K):
    # with S = plus + minus the seven sets collapse to
    # out[k] = sum_l s_l (S(k-l) + S(l-k) - S(k+l) - minus(-k-l))
    plus, minus = _pairs(f, g, K)
    S = plus + minus
    out = np.zeros(K + 1)
    for k in range(K + 1):
        acc = 0.0
        for l in range(K + 1):
            acc += s[l] * (S[K + k - l] + S[K + l - k] - S[K + k + l])
        for l in range(K - k + 1):
            acc -= s[l] * minus[K - k - l]
        out[k] = acc
    return out


@njit(cache=True)
def _quad_kernel(f, g, K, weighted):
    plus, minus = _pairs(f, g, K)
    out = np.empty(K + 1)
    for k in range(K + 1):
        if weighted:
            out[k] = minus[K - k] + plus[K + k] - minus[K + k]
        else:
            out[k] = minus[K + k] + minus[K - k] + plus[K + k]
    return out


@njit(cache=True)
def _rhs_kernel(u, chi, a, b, mu, nu, L):
    K = u.shape[0] - 1
    kap = np.arange(K + 1) * np.pi / L
    v = nu * u / (mu + kap * kap)
    ba = b / a
    r = mu / nu
    kv = kap * v
    # the sums are linear in their first slot, so the u and v parts share one call
    q = _quad_kernel(u - r * v, kv, K, True)
    c = _cubic_kernel(r * v - u, v, kv, K)
    uu = _quad_kernel(u, u, K, False)
    out = np.empty(K + 1)
    for k in range(K + 1):
        kk = kap[k] * kap[k]
        lam = -(kk + a) + chi * mu * kk / (mu + kk)
        g = kap[k] * (0.5 * ba * q[k] + 0.25 * r * ba * ba * c[k])
        out[k] = lam * u[k] - 0.5 * b * uu[k] + chi * r * g
    tail = 0.0
    for k in range(1, K + 1):
        tail += u[k] * u[k]
    out[0] = -a * u[0] - b * u[0] * u[0] - 0.5 * b * tail
    return out


@njit(cache=True)
def _rk4_run(u, nsteps, dt, chi, a, b, mu, nu, L, level):
    for s in range(nsteps):
        k1 = _rhs_kernel(u, chi, a, b, mu, nu, L)
        k2 = _rhs_kernel(u + 0.5 * dt * k1, chi, a, b, mu, nu, L)
        k3 = _rhs_kernel(u + 0.5 * dt * k2, chi, a, b, mu, nu, L)
        k4 = _rhs_kernel(u + dt * k3, chi, a, b, mu, nu, L)
        u = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for i in range(u.shape[0]):
            if not np.isfinite(u[i]) or abs(u[i]) > level:
                return u, s + 1, False
    return u, nsteps, True


def _check_state(u):
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 3:
        raise ValueError("Galerkin truncation needs K >= 2")
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite Galerkin state")
    return u


def galerkin_rhs(u, params: Params) -> np.ndarray:
    """Time derivative of every deviation mode."""
    u = _check_state(u)
    p = params
    return _rhs_kernel(u, p.chi, p.a, p.b, p.mu, p.nu, p.L)


def galerkin_rhs_numpy(u, params: Params) -> np.ndarray:
    """Vectorised numpy evaluation of the same right-hand side (slower)."""
    u = _check_state(u)
    K = u.size - 1
    a, b, mu, nu, L, chi = params.a, params.b, params.mu, params.nu, params.L, params.chi
    kap = wavenumbers(K, L)
    v = chemical_modes(u, params)
    lam = np.array([lambda_k(k, chi, a, mu, L) for k in range(K + 1)])
    g = kap * (
        0.5 * (b / a) * quadratic_sum(u, v, True, kap=kap)
        - 0.5 * (mu / nu) * (b / a) * quadratic_sum(v, v, True, kap=kap)
        - 0.25 * (mu / nu) * (b / a) ** 2 * cubic_sum(u, v, v, kap)
        + 0.25 * (mu / nu) ** 2 * (b / a) ** 2 * cubic_sum(v, v, v, kap)
    )
    out = lam * u - 0.5 * b * quadratic_sum(u, u, False) + (chi * mu / nu) * g
    out[0] = -a * u[0] - b * u[0] ** 2 - 0.5 * b * np.sum(u[1:] ** 2)
    return out


@dataclass
class GalerkinTrajectory:
    times: np.ndarray
    modes: np.ndarray  # shape (n_records, K + 1)
    blowup: bool = False

    @property
    def final(self) -> np.ndarray:
        return self.modes[-1]


def integrate_galerkin(s0, params: Params, dt: float, t_end: float, record_every: float | None = None,
                       blowup_level: float = 1e6) -> GalerkinTrajectory:
    """Classical RK4 on the truncated mode system.

    Explicit stepping: ``dt`` must resolve the stiffest mode,
    ``|lambda_K| dt < 2.78``.
    """
    u = _check_state(s0.modes if isinstance(s0, GalerkinState) else s0).copy()
    if not dt > 0 or not t_end > 0:
        raise ValueError("dt and t_end must be positive")
    p = params
    n = int(round(t_end / dt))
    every = max(1, int(round(record_every / dt))) if record_every else n
    times, recs = [0.0], [u.copy()]
    done = 0
    while done < n:
        chunk = min(every, n - done)
        u, taken, ok = _rk4_run(u, chunk, dt, p.chi, p.a, p.b, p.mu, p.nu, p.L, blowup_level)
        done += taken
        times.append(done * dt)
        recs.append(u.copy())
        if not ok:
            return GalerkinTrajectory(np.array(times), np.array(recs), True)
    return GalerkinTrajectory(np.array(times), np.array(recs), False)


def center_manifold_residual(pd, amp: float, chi_tilde: float, params: Params, K: int) -> float:
    """Invariance defect of the quadratic center-manifold ansatz.

    The ansatz is ``u_k0 = amp``, ``u_0 = a0 amp**2``, ``u_2k0 = a2k0 amp**2``.
    For every slaved mode ``k`` the defect is
    ``du_k/dt - (dh_k/du_k0) du_k0/dt`` with ``h_k`` the ansatz; returns its
    Euclidean norm.
    """
    k0 = pd.k0
    if 2 * k0 > K:
        raise ValueError("truncation must include the second harmonic 2*k0")
    u = np.zeros(K + 1)
    u[k0] = amp
    u[0] = pd.a0 * amp**2
    u[2 * k0] = pd.a2k0 * amp**2
    p = params.with_chi(pd.chi_k0_star + chi_tilde)
    du = galerkin_rhs(u, p)
    slope = np.zeros(K + 1)
    slope[0] = 2 * pd.a0 * amp
    slope[2 * k0] = 2 * pd.a2k0 * amp
    defect = du - slope * du[k0]
    defect[k0] = 0.0
    return float(np.linalg.norm(defect))


def profile_modes_to_deviation(coeffs, params: Params) -> np.ndarray:
    """Physical cosine coefficients to deviation modes (subtract a/b from mode 0)."""
    m = np.array(coeffs, dtype=float)
    m[0] -= params.u_const
    return m


def deviation_to_profile_modes(modes, params: Params) -> np.ndarray:
    m = np.array(modes, dtype=float)
    m[0] += params.u_const
    return m
