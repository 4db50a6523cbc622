import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from chemotaxis_lab.model import (
    Params, check_profile, cosine_profile, grid_for_spacing, make_grid, project_to_modes,
    read_modes_csv, read_profile_csv, read_table, reflect, synthesize_profile, write_modes_csv,
    write_profile_csv, write_table,
)


@pytest.mark.parametrize("field", ["chi", "a", "b", "mu", "nu", "L"])
@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_params_reject_nonpositive(field, bad):
    kw = dict(chi=1.0, a=1.0, b=1.0, mu=1.0, nu=1.0, L=1.0)
    kw[field] = bad
    with pytest.raises(ValueError, match=field):
        Params(**kw)


def test_constant_state():
    p = Params(chi=3.0, a=2.0, b=0.5, mu=4.0, nu=3.0)
    assert p.u_const == 4.0
    assert p.v_const == pytest.approx(3.0)
    assert p.with_chi(7.0).chi == 7.0 and p.with_chi(7.0).a == 2.0


def test_grid_basics():
    g = make_grid(6.0, 301)
    assert g.dx == pytest.approx(0.02)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 6.0
    assert g.integrate(np.ones(301)) == pytest.approx(6.0)
    assert grid_for_spacing(6.0, 0.02).n_points == 301
    with pytest.raises(ValueError):
        make_grid(1.0, 2)
    with pytest.raises(ValueError):
        make_grid(-1.0, 10)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0


def test_check_profile_rejects_shape_and_nan(grid101):
    with pytest.raises(ValueError, match="shape"):
        check_profile(np.ones(100), grid101)
    u = np.ones(101)
    u[3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        check_profile(u, grid101)


def test_trapezoid_integrates_cosines_exactly(grid101):
    # trapezoid is exact for cos(k pi x/L) with k < 2(N-1)
    for k in range(1, 20):
        assert abs(grid101.integrate(cosine_profile(grid101, 0.0, 1.0, k))) < 1e-13


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 9, elements=st.floats(-2, 2)))
def test_modes_round_trip(coeffs):
    g = make_grid(2.5, 41)
    back = project_to_modes(synthesize_profile(coeffs, g), g, 8)
    np.testing.assert_allclose(back, coeffs, atol=1e-12)


def test_projection_under_resolved(grid101):
    with pytest.raises(ValueError, match="under-resolved"):
        project_to_modes(np.ones(101), grid101, 101)


def test_reflect_is_involution(rng):
    u = rng.random(17)
    np.testing.assert_array_equal(reflect(reflect(u)), u)
    g = make_grid(1.0, 17)
    np.testing.assert_allclose(reflect(cosine_profile(g, 1, 0.3, 1)), cosine_profile(g, 1, -0.3, 1), atol=1e-15)


def test_csv_round_trips(tmp_path, grid101, rng):
    u = rng.random(101)
    write_profile_csv(tmp_path / "p.csv", grid101, u, "u", comment="chi=5 L=1")
    assert (tmp_path / "p.csv").read_text().startswith("# chi=5 L=1\nx,u\n")
    x, back = read_profile_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(x, grid101.nodes)
    np.testing.assert_array_equal(back, u)

    m = rng.normal(size=7)
    write_modes_csv(tmp_path / "m.csv", m, comment="modes")
    np.testing.assert_array_equal(read_modes_csv(tmp_path / "m.csv"), m)

    write_table(tmp_path / "t.csv", ["a", "b", "c"], [(1, 0.1, True), ("x", 2.5, False)], comment="c")
    header, rows = read_table(tmp_path / "t.csv")
    assert header == ["a", "b", "c"]
    assert rows == [["1", "0.1", "true"], ["x", "2.5", "false"]]
