import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from chemotaxis_lab.integrator import SimConfig, SimulationBlowup, mirror_check, rhs, simulate, step_rk4
from chemotaxis_lab.model import Params, cosine_profile, make_grid

P = Params(chi=7.0, a=1.2, b=0.8, mu=1.5, nu=0.9, L=1.0)


def _continuum_rhs(p):
    """Exact du/dt for u = 1 + 0.3 cos(pi x) + 0.1 cos(2 pi x) (v solved mode by mode)."""
    x = sp.symbols("x")
    k1, k2 = sp.pi / p.L, 2 * sp.pi / p.L
    u = 1 + sp.Rational(3, 10) * sp.cos(k1 * x) + sp.Rational(1, 10) * sp.cos(k2 * x)
    v = p.nu * (1 / p.mu + sp.Rational(3, 10) * sp.cos(k1 * x) / (p.mu + k1**2)
                + sp.Rational(1, 10) * sp.cos(k2 * x) / (p.mu + k2**2))
    f = sp.diff(u, x, 2) - p.chi * sp.diff(u * sp.diff(v, x) / v, x) + u * (p.a - p.b * u)
    return sp.lambdify(x, u, "numpy"), sp.lambdify(x, f, "numpy")


def test_rhs_second_order_against_continuum():
    uf, ff = _continuum_rhs(P)
    errs = []
    for n in (41, 81, 161):
        g = make_grid(P.L, n)
        errs.append(np.max(np.abs(rhs(uf(g.nodes), P, g) - ff(g.nodes))))
    assert errs[-1] < 1e-2
    for e1, e2 in zip(errs, errs[1:]):
        assert e1 / e2 > 3.5


def test_constant_state_is_fixed(grid101):
    p = Params(chi=30.0, a=2.0, b=0.5)
    assert np.max(np.abs(rhs(np.full(101, 4.0), p, grid101))) < 1e-9


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 31, elements=st.floats(0.05, 3.0)), st.floats(0.1, 40.0))
def test_reflection_equivariance(u, chi):
    g = make_grid(2.0, 31)
    p = P.with_chi(chi)
    np.testing.assert_allclose(rhs(mirror_check(u), p, g), rhs(u, p, g)[::-1], rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 31, elements=st.floats(0.05, 3.0)), st.floats(0.1, 40.0))
def test_discrete_mass_balance(u, chi):
    # transport terms telescope under the trapezoid weights
    g = make_grid(2.0, 31)
    p = P.with_chi(chi)
    lhs = g.integrate(rhs(u, p, g))
    src = g.integrate(u * (p.a - p.b * u))
    assert lhs == pytest.approx(src, abs=1e-9 * (1 + np.abs(rhs(u, p, g)).max()))


def test_rk4_fourth_order():
    # a rough start so the stiff modes carry the time error
    g = make_grid(1.0, 21)
    u0 = 1 + sum(0.3 / k * np.cos(k * np.pi * g.nodes) for k in range(1, 8))
    p = Params(chi=9.0)

    def run(dt, T=0.1):
        u = u0.copy()
        for _ in range(int(round(T / dt))):
            u = step_rk4(u, p, g, dt)
        return u

    ref = run(5e-5)
    e1 = np.max(np.abs(run(4e-4) - ref))
    e2 = np.max(np.abs(run(2e-4) - ref))
    assert 14.0 < e1 / e2 < 18.0


def test_simulate_reaches_constant_below_threshold(grid101):
    res = simulate(cosine_profile(grid101, 1.0, 0.5), Params(chi=5.0), grid101,
                   SimConfig(t_end=60.0, dt=5e-5, check_every=1000))
    assert res.steady
    assert np.max(np.abs(res.final_u - 1.0)) < 1e-4
    np.testing.assert_allclose(res.final_v, 1.0, atol=1e-4)
    assert res.snapshots[0][0] == 0.0 and res.snapshots[-1][0] == pytest.approx(res.t_final)
    assert res.last_rate < 1e-7


def test_mass_history_follows_logistic_balance(grid101):
    # d/dt int u = int u(a - bu); check with a trapezoid rule in time
    p = Params(chi=8.0)
    res = simulate(cosine_profile(grid101, 1.0, 0.6), p, grid101,
                   SimConfig(t_end=0.5, dt=5e-5, check_every=100, snapshot_every=0.005, stop_when_steady=False))
    ts = np.array([t for t, _ in res.snapshots])
    src = np.array([grid101.integrate(u * (1 - u)) for _, u in res.snapshots])
    mass = np.array([grid101.integrate(u) for _, u in res.snapshots])
    predicted = mass[0] + np.concatenate(([0], np.cumsum(0.5 * (src[1:] + src[:-1]) * np.diff(ts))))
    assert np.max(np.abs(predicted - mass)) < 1e-4
    assert len(res.mass_history) == 101


def test_snapshots_cadence(grid101):
    res = simulate(cosine_profile(grid101, 1.0, 0.5), Params(chi=5.0), grid101,
                   SimConfig(t_end=1.0, dt=5e-5, check_every=100, snapshot_every=0.25, stop_when_steady=False))
    np.testing.assert_allclose([t for t, _ in res.snapshots], [0, 0.25, 0.5, 0.75, 1.0])


def test_unstable_step_reports_blowup(grid101):
    with pytest.raises(SimulationBlowup) as err:
        simulate(cosine_profile(grid101, 1.0, 0.5), Params(chi=5.0), grid101, SimConfig(t_end=1.0, dt=1e-3))
    assert err.value.t > 0


@pytest.mark.parametrize("bad", [np.full(101, -0.1), np.zeros(101)])
def test_rejects_bad_initial_density(grid101, bad):
    with pytest.raises(ValueError):
        simulate(bad, Params(chi=5.0), grid101, SimConfig(t_end=1.0))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(t_end=0.0)
    with pytest.raises(ValueError):
        SimConfig(t_end=1.0, check_every=0)


def test_mirror_symmetric_runs(grid101):
    cfg = SimConfig(t_end=2.0, dt=5e-5, check_every=200, stop_when_steady=False)
    p = Params(chi=15.0)
    u0 = cosine_profile(grid101, 1.0, 0.3) + cosine_profile(grid101, 0.0, 0.1, 2)
    a = simulate(u0, p, grid101, cfg).final_u
    b = simulate(mirror_check(u0), p, grid101, cfg).final_u
    np.testing.assert_allclose(b, a[::-1], rtol=1e-10, atol=1e-12)
