import numpy as np
import pytest

from chemotaxis_lab.cli import main
from chemotaxis_lab.model import Params, cosine_profile, make_grid, read_table
from chemotaxis_lab.presets import (
    PRESETS, TAGS, BranchJob, ExperimentPreset, Run, Tier, checked_tier, classify, run_preset, tier,
)


def test_preset_parameter_sets():
    assert PRESETS["exp1"].params == dict(a=1.0, b=1.0, mu=1.0, nu=1.0, L=1.0)
    assert PRESETS["exp3"].params["L"] == 6.0 and PRESETS["exp4"].params["L"] == 6.0
    assert PRESETS["exp64"].params == dict(a=2.0, b=1.0, mu=3.0, nu=1.0, L=6.0)
    chis = {n: sorted({r.chi for r in p.runs}) for n, p in PRESETS.items()}
    assert chis == {"exp1": [5.0, 11.96], "exp2": [11.98, 20.0, 40.0], "exp3": [2.0, 3.95],
                    "exp4": [4.01, 10.0, 20.0], "exp64": [3.3, 10.0, 20.0]}
    exp1_ics = {r.ic for r in PRESETS["exp1"].runs}
    assert {"1+0.5*cos(1)", "1-0.5*cos(1)"} <= exp1_ics
    for p in PRESETS.values():
        assert all(r.tag in TAGS for r in p.runs)
        assert all(b.tag in TAGS for b in p.branches)
    # chi = 11.98 is given the horizon at which the nonconstant state settles
    assert {r.t_end for r in PRESETS["exp2"].runs if r.chi == 11.98} == {360.0}


def test_exp4_tags_follow_the_initial_sign():
    for r in PRESETS["exp4"].runs:
        if r.chi >= 10:
            assert r.tag == ("double-boundary-spike" if r.ic.startswith("1+") else "interior-spike")


def test_quick_tier_is_stable():
    t = tier(True)
    assert (t.dx, t.quick) == (0.02, True)
    assert t.dt * 4 / t.dx**2 <= 2.78
    assert checked_tier(Tier(0.01, 2e-4, 100, True)).dt == pytest.approx(5e-5)
    assert tier(False) == Tier()


def test_classify(grid101):
    p = Params(chi=1.0)
    x = grid101.nodes
    assert classify(np.full(101, 1.0005), p, grid101, None) == "converge-to-constant"
    u = cosine_profile(grid101, 1.0, 0.3)
    assert classify(u, p, grid101, []) == "nonconstant-steady"
    assert classify(u, p, grid101, [0.0]) == "boundary-spike"
    assert classify(u, p, grid101, [1.0]) == "boundary-spike"
    assert classify(u, p, grid101, [0.0, 1.0]) == "double-boundary-spike"
    assert classify(u, p, grid101, [0.5]) == "interior-spike"
    assert classify(u, p, grid101, [0.0, 0.66]) == "mixed-spike"


TINY = ExperimentPreset(
    "tiny", dict(a=1.0, b=1.0, mu=1.0, nu=1.0, L=1.0),
    (Run(5.0, "1+0.5*cos(1)", "converge-to-constant", 30.0),
     Run(20.0, "1+0.5*cos(1)", "converge-to-constant", 5.0)),
    (BranchJob(1, 1, 11.98, 16.0, 1.0, (13.0, 14.0, 15.0), "nonconstant-steady"),),
)


def test_run_preset_artifacts_and_determinism(tmp_path):
    a = run_preset(TINY, tmp_path / "a", quick=True, workers=1)
    b = run_preset(TINY, tmp_path / "b", quick=True, workers=2)
    assert [r[6] for r in a.rows] == ["ok", "mismatch", "ok"]
    assert not a.ok
    da, db = a.out_dir, b.out_dir
    names = sorted(p.relative_to(da) for p in da.rglob("*.csv"))
    assert set(map(str, names)) >= {"manifest.csv", "timings.csv", "runs/run00/snapshots.csv",
                                    "runs/run00/summary.csv", "branch_k1_plus/branch.csv",
                                    "branch_k1_plus/spikes.csv", "branch_k1_plus/audit.csv",
                                    "branch_k1_plus/family.csv", "branch_k1_plus/profiles.csv"}
    for n in names:
        if str(n) != "timings.csv":
            assert (da / n).read_bytes() == (db / n).read_bytes(), n
    header, rows = read_table(da / "manifest.csv")
    assert tuple(header) == ("id", "kind", "chi", "ic", "expected", "measured", "status", "detail")
    assert rows[1][5] == "nonconstant-steady"
    assert (da / "manifest.csv").read_text().startswith("# preset=tiny")
    header, rows = read_table(da / "branch_k1_plus" / "audit.csv")
    assert all(r[2] == "true" for r in rows)


def test_cli_preset_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setitem(PRESETS, "tiny", TINY)
    assert main(["--quick", "--out", str(tmp_path), "--workers", "1", "preset", "tiny", "--no-branches"]) == 1
    header, rows = read_table(tmp_path / "tiny" / "manifest.csv")
    assert len(rows) == 2
