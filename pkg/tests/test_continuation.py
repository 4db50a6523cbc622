import numpy as np
import pytest

from chemotaxis_lab.bifurcation import local_branch_profile, pitchfork_coefficients
from chemotaxis_lab.continuation import (
    NewtonFailure, SeedingError, assess_stability, jacobian, newton_solve, solve_at, steady_residual,
    trace_branch,
)
from chemotaxis_lab.integrator import SimConfig, simulate
from chemotaxis_lab.model import Params, make_grid, project_to_modes

P1 = Params(chi=11.98)
G1 = make_grid(1.0, 101)
P6 = Params(chi=4.0, L=6.0)
G6 = make_grid(6.0, 151)


@pytest.fixture(scope="module")
def branch_l1():
    return trace_branch(1, 1, (11.98, 14.0), 0.25, P1, G1)


@pytest.fixture(scope="module")
def branch_l6():
    return trace_branch(2, 1, (4.0, 3.0), 0.05, P6, G6, chi_after_fold=5.0)


def test_jacobian_matches_central_differences(rng):
    u = 1 + 0.2 * rng.random(101)
    J = jacobian(u, P1, G1)
    d = rng.normal(size=101)
    h = 1e-6
    jd = (steady_residual(u + h * d, P1, G1) - steady_residual(u - h * d, P1, G1)) / (2 * h)
    assert np.max(np.abs(J @ d - jd)) < 1e-4 * np.max(np.abs(jd))


def test_newton_from_local_seed():
    pd = pitchfork_coefficients(1, P1)
    u, it, res = newton_solve(local_branch_profile(pd, 11.98, 1, G1), P1, G1, return_info=True)
    assert res < 1e-10 and it <= 6
    assert np.max(np.abs(steady_residual(u, P1, G1))) < 1e-10
    assert project_to_modes(u, G1, 1)[1] > 0


def test_newton_failure_carries_state():
    pd = pitchfork_coefficients(1, P1)
    with pytest.raises(NewtonFailure) as err:
        newton_solve(local_branch_profile(pd, 11.98, 1, G1), P1, G1, max_iters=1)
    assert err.value.iters == 1 and err.value.u is not None
    with pytest.raises(ValueError):
        newton_solve(-np.ones(101), P1, G1)


def test_stability_of_constant_state():
    ev, stable = assess_stability(np.ones(101), Params(chi=5.0), G1, n_eigs=3)
    assert stable and len(ev) == 3
    assert ev[0].real == pytest.approx(-1.0, rel=1e-3)  # mode 0 decays at -a
    _, stable = assess_stability(np.ones(101), Params(chi=13.0), G1)
    assert not stable


def test_supercritical_branch_invariants(branch_l1):
    br = branch_l1
    assert br.terminated_by == "reached-chi-max" and br.origin == (1, 1) and br.fold_chi is None
    chis = br.chis
    assert chis[0] == 11.98 and chis[-1] == pytest.approx(14.0)
    assert np.all(np.diff(chis) > 0)
    # lattice values are hit exactly
    for c in (12.23, 12.48, 12.98):
        assert np.any(np.abs(chis - c) < 1e-12)
    for q in br.points:
        assert q.residual < 1e-8
        assert q.stable and q.leading_eig < 0
        assert q.u_at_0 > 1 > q.u_at_L  # sign +: mode 1 positive, u decreasing
        assert q.inf_u < 1 < q.sup_u
        assert q.mass < 1.0
    # the boundary peak saturates near 1.6 while the far end and the mass keep falling
    assert np.all(np.diff([q.u_at_L for q in br.points]) < 0)
    assert np.all(np.diff([q.mass for q in br.points]) < 0)


def test_branch_signs_are_mirror_images(branch_l1):
    minus = trace_branch(1, -1, (11.98, 12.5), 0.25, P1, G1, assess=False)
    plus = {round(q.chi, 10): q.u for q in branch_l1.points}
    for q in minus.points:
        key = round(q.chi, 10)
        if key in plus:
            np.testing.assert_allclose(q.u, plus[key][::-1], atol=1e-8)


def test_seeding_on_wrong_side():
    with pytest.raises(SeedingError):
        trace_branch(1, 1, (11.0, 12.0), 0.25, P1, G1)
    with pytest.raises(SeedingError):
        trace_branch(2, 1, (4.1, 5.0), 0.05, P6, G6)


def test_subcritical_fold(branch_l6):
    br = branch_l6
    assert br.fold_chi == pytest.approx(3.42, abs=0.01)
    first = [q for q in br.points if q.segment == 0]
    second = [q for q in br.points if q.segment == 1]
    assert first and second
    assert all(not q.stable for q in first)  # the bifurcating branch is unstable
    assert all(q.stable for q in second if q.chi > br.fold_chi + 0.05)
    assert min(q.chi for q in br.points) == pytest.approx(br.fold_chi, abs=1e-2)
    assert second[-1].chi == pytest.approx(5.0)
    # past the fold the state sits farther from the constant
    assert second[-1].sup_u > first[0].sup_u


def test_fold_without_continuation():
    br = trace_branch(2, -1, (4.0, 3.0), 0.05, P6, G6, assess=False)
    assert br.terminated_by == "fold-detected"
    assert br.fold_chi == pytest.approx(3.42, abs=0.01)


def test_solve_at_off_lattice(branch_l1, branch_l6):
    q = solve_at(branch_l1, 13.1, P1, G1)
    assert q.chi == 13.1 and q.residual < 1e-8
    q6 = solve_at(branch_l6, 3.95, P6, G6, segment=1)
    assert q6.chi == 3.95 and q6.stable and q6.segment == 1
    with pytest.raises(ValueError):
        solve_at(branch_l6, 3.95, P6, G6, segment=7)


def test_stable_branch_point_attracts_time_march(branch_l6):
    # a perturbed stable state relaxes back to it
    q = [q for q in branch_l6.points if q.segment == 1 and q.stable][-1]
    p = P6.with_chi(q.chi)
    res = simulate(q.u * (1 + 0.01 * np.cos(np.pi * G6.nodes / 6.0)), p, G6,
                   SimConfig(t_end=200.0, dt=2e-4, check_every=500, steady_tol=1e-8))
    assert np.max(np.abs(res.final_u - q.u)) < 1e-4
