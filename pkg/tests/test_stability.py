import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chemotaxis_lab.continuation import jacobian
from chemotaxis_lab.model import Params, make_grid
from chemotaxis_lab.stability import (
    analyze, chi_k_star, chi_star, chi_star_bounds, chi_star_explicit, k_star_floor, lambda_k,
    regular_chi_k_star,
)

pos = st.floats(0.05, 20.0)
lengths = st.floats(0.3, 15.0)


def lam_oracle(k, chi, a, mu, L):
    # linearisation around (a/b, nu a/(mu b)): the sensitivity ratio u/v is mu/nu
    kap2 = (k * math.pi / L) ** 2
    return -kap2 - a + chi * mu * kap2 / (mu + kap2)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 12), st.floats(0.0, 60.0), pos, pos, lengths)
def test_lambda_matches_linearisation(k, chi, a, mu, L):
    assert lambda_k(k, chi, a, mu, L) == pytest.approx(lam_oracle(k, chi, a, mu, L), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), pos, pos, lengths)
def test_chi_k_star_is_root(k, a, mu, L):
    cs = chi_k_star(k, a, mu, L)
    scale = abs(lam_oracle(k, 0.0, a, mu, L))
    assert abs(lambda_k(k, cs, a, mu, L)) <= 1e-10 * scale
    assert lambda_k(k, cs * 0.99, a, mu, L) < 0 < lambda_k(k, cs * 1.01, a, mu, L)


def test_mode_zero_always_decays():
    assert lambda_k(0, 1e6, 2.0, 1.0, 1.0) == -2.0
    with pytest.raises(ValueError):
        chi_k_star(0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        lambda_k(-1, 1.0, 1.0, 1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(pos, pos, lengths)
def test_chi_star_bounds_and_unimodal(a, mu, L):
    K = max(64, int(3 * L / math.pi * (a * mu) ** 0.25) + 4)
    vals = np.array([chi_k_star(k, a, mu, L) for k in range(1, K + 1)])
    d = np.sign(np.diff(vals))
    d = d[d != 0]
    assert np.count_nonzero(np.diff(d) != 0) <= 1 and (d.size == 0 or d[-1] > 0)
    cs, k = chi_star(a, mu, L, K)
    lo, hi = chi_star_bounds(a, mu, L)
    assert lo * (1 - 1e-12) <= cs <= hi * (1 + 1e-12)
    assert cs == pytest.approx(chi_star_explicit(a, mu, L), rel=1e-12)
    assert k in (max(k_star_floor(a, mu, L), 1), k_star_floor(a, mu, L) + 1)


@pytest.mark.parametrize("a,mu,L,expected", [(1, 1, 1, 0), (1, 1, 6, 1), (2, 3, 6, 2), (1, 1, math.pi, 1)])
def test_k_star_floor(a, mu, L, expected):
    assert k_star_floor(a, mu, L) == expected


def test_tie_flag_on_exact_tie():
    # chi_1* = chi_2* when mu L^2 = 2 pi^2 and a = 2 pi^2 / L^2 ... solve for L with a = mu = 1
    # kk1 kk2 = (a mu) L^4 makes the two thresholds coincide: L^4 = 4 pi^4
    L = math.sqrt(2.0) * math.pi
    cs, k, tie = chi_star(1.0, 1.0, L, return_tie=True)
    assert k == 1 and tie
    assert chi_k_star(1, 1.0, 1.0, L) == pytest.approx(chi_k_star(2, 1.0, 1.0, L), rel=1e-12)


def test_chi_star_warns_at_bracket_end():
    with pytest.warns(RuntimeWarning, match="bracket"):
        chi_star(1.0, 1.0, 60.0, K_max=4)


def test_analyze_verdicts():
    cs, _ = chi_star(1.0, 1.0, 1.0)
    assert analyze(Params(chi=5.0)).verdict == "stable"
    assert analyze(Params(chi=cs)).verdict == "critical"
    rep = analyze(Params(chi=15.0), K_max=8)
    assert rep.verdict == "unstable"
    assert rep.lambdas.shape == (9,) and rep.chi_stars.shape == (8,)
    assert rep.lambdas[1] > 0 > rep.lambdas[2]
    assert rep.k_star_index == 1 and rep.k_star_floor == 0


def test_regular_threshold_matches_when_constant_v_is_one():
    # u/v = u at the constant state exactly when nu a / (mu b) = 1
    a, mu, nu = 1.5, 2.0, 0.5
    b = a * nu / mu
    assert regular_chi_k_star(2, a, b, mu, nu, 3.0) == pytest.approx(chi_k_star(2, a, mu, 3.0), rel=1e-13)


@pytest.mark.parametrize("chi", [5.0, 15.0])
def test_discrete_jacobian_at_constant_state(chi):
    # the leading eigenvalues of the semi-discrete linearisation approach lambda_k
    p = Params(chi=chi)
    g = make_grid(1.0, 201)
    ev = np.sort(np.linalg.eigvals(jacobian(np.ones(201), p, g)).real)[::-1][:4]
    want = np.sort([lambda_k(k, chi, 1, 1, 1) for k in range(4)])[::-1]
    np.testing.assert_allclose(ev, want, rtol=2e-3, atol=1e-4)
