"""The experiment presets and the machinery that runs them.

Each preset lists time-marching runs (chi, initial profile, expected outcome)
and, for the spiky cases, branch traces followed by spike analysis.  Every
expected-outcome tag is checked against a measured verdict and the result is
written to ``manifest.csv``.  Wall-clock timings go to ``timings.csv`` so all
other files are reproducible byte for byte.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import RunDescription, parse_ic
from .continuation import NewtonFailure, SeedingError, solve_at, trace_branch
from .diagnostics import detect_spiky_points, flattening_check, theorem42_audit
from .elliptic import solve_chemical
from .integrator import SimConfig, SimulationBlowup, simulate
from .model import Grid1D, Params, grid_for_spacing, write_table

TAGS = ("converge-to-constant", "nonconstant-steady", "boundary-spike", "interior-spike",
        "double-boundary-spike", "mixed-spike")
CONVERGE_TOL = 1e-3
QUICK_DX = 0.02
QUICK_DT = 2e-4
RK4_DIFFUSION_LIMIT = 2.78  # real-axis extent of the RK4 stability region


@dataclass(frozen=True)
class Run:
    chi: float
    ic: str
    tag: str
    t_end: float


@dataclass(frozen=True)
class BranchJob:
    k0: int
    sign: int
    chi_start: float
    chi_stop: float
    dchi: float
    family: tuple
    tag: str
    chi_after_fold: float | None = None


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    params: dict  # a, b, mu, nu, L
    runs: tuple
    branches: tuple = ()
    description: str = ""

    def base_params(self, chi: float = 1.0) -> Params:
        return Params(chi=chi, **self.params)

    def to_description(self) -> RunDescription:
        """The preset's parameters and run list as a plain config."""
        chis = tuple(sorted({r.chi for r in self.runs}))
        ics = ";".join(dict.fromkeys(r.ic for r in self.runs))
        t_end = max(r.t_end for r in self.runs)
        return RunDescription(chi=chis, ic=ics, t_end=t_end, **self.params)


L1 = dict(a=1.0, b=1.0, mu=1.0, nu=1.0, L=1.0)
L6 = dict(a=1.0, b=1.0, mu=1.0, nu=1.0, L=6.0)
L6B = dict(a=2.0, b=1.0, mu=3.0, nu=1.0, L=6.0)

_EXP1_ICS = ("1+0.5*cos(1)", "1-0.5*cos(1)", "1+0.5*cos(1)+0.1*cos(2)", "1+0.5*cos(1)-0.1*cos(2)",
             "1-0.5*cos(1)+0.1*cos(2)", "1-0.5*cos(1)-0.1*cos(2)")
_EXP2_ICS = ("1+0.5*cos(1)", "1-0.5*cos(1)", "1+0.5*cos(1)+0.1*cos(2)", "1+0.5*cos(1)-0.1*cos(2)")


def _exp2_tag(chi):
    return "nonconstant-steady" if chi < 15 else "boundary-spike"


def _exp4_runs():
    runs = []
    for c in (4.01, 10.0, 20.0):
        for sgn, spike in (("+", "double-boundary-spike"), ("-", "interior-spike")):
            tag = "nonconstant-steady" if c < 5 else spike
            runs.append(Run(c, f"1{sgn}0.5*cos(2)", tag, 200.0 if c < 5 else 100.0))
    return tuple(runs)


PRESETS = {
    "exp1": ExperimentPreset(
        "exp1", L1,
        tuple(Run(c, ic, "converge-to-constant", 60.0 if c < 10 else 2000.0)
              for c in (5.0, 11.96) for ic in _EXP1_ICS),
        description="global stability of (1,1) below threshold, L=1",
    ),
    "exp2": ExperimentPreset(
        "exp2", L1,
        tuple(Run(c, ic, _exp2_tag(c), 360.0 if c < 15 else 80.0)
              for c in (11.98, 20.0, 40.0) for ic in _EXP2_ICS),
        (BranchJob(1, 1, 11.98, 40.0, 0.5, (20.0, 30.0, 40.0), "boundary-spike"),
         BranchJob(1, -1, 11.98, 40.0, 0.5, (20.0, 30.0, 40.0), "boundary-spike")),
        "supercritical branch and boundary spikes, L=1",
    ),
    "exp3": ExperimentPreset(
        "exp3", L6,
        (Run(2.0, "1+0.5*cos(2)", "converge-to-constant", 100.0),
         Run(2.0, "1-0.5*cos(2)", "converge-to-constant", 100.0),
         Run(3.95, "1+0.1*cos(2)", "converge-to-constant", 1000.0),
         Run(3.95, "1-0.1*cos(2)", "converge-to-constant", 1000.0),
         Run(3.95, "1+0.5*cos(2)", "nonconstant-steady", 200.0),
         Run(3.95, "1-0.5*cos(2)", "nonconstant-steady", 200.0)),
        description="coexistence below the subcritical threshold, L=6",
    ),
    "exp4": ExperimentPreset(
        "exp4", L6,
        _exp4_runs(),
        (BranchJob(2, 1, 4.0, 3.0, 0.05, (10.0, 15.0, 20.0), "double-boundary-spike", 20.5),
         BranchJob(2, -1, 4.0, 3.0, 0.05, (10.0, 15.0, 20.0), "interior-spike", 20.5)),
        "subcritical branch, double boundary and interior spikes, L=6",
    ),
    "exp64": ExperimentPreset(
        "exp64", L6B,
        (Run(3.3, "2+0.5*cos(3)", "nonconstant-steady", 200.0),
         Run(3.3, "2-0.5*cos(3)", "nonconstant-steady", 200.0),
         Run(10.0, "2+0.5*cos(3)", "mixed-spike", 100.0),
         Run(20.0, "2+0.5*cos(3)", "mixed-spike", 100.0)),
        (BranchJob(3, 1, 3.29, 2.5, 0.05, (10.0, 15.0, 20.0), "mixed-spike", 20.5),),
        "boundary plus interior spike, a=2, mu=3, L=6",
    ),
}


# settings ----------------------------------------------------------------

@dataclass(frozen=True)
class Tier:
    dx: float = 0.01
    dt: float = 5e-5
    check_every: int = 1000
    quick: bool = False


def tier(quick: bool) -> Tier:
    if quick:
        return checked_tier(Tier(QUICK_DX, QUICK_DT, 250, True))
    return Tier()


def checked_tier(t: Tier) -> Tier:
    """Halve ``dt`` until RK4 is stable for the diffusion part on this grid."""
    dt = t.dt
    while dt * 4.0 / t.dx**2 > RK4_DIFFUSION_LIMIT:
        dt /= 2
    return replace(t, dt=dt)


def classify(u, params: Params, grid: Grid1D, spiky: list | None) -> str:
    """Outcome tag of one steady profile; ``spiky`` lists detected locations."""
    if float(np.max(np.abs(u - params.u_const))) < CONVERGE_TOL:
        return "converge-to-constant"
    if not spiky:
        return "nonconstant-steady"
    edge = 1e-9 * grid.L + 0.5 * grid.dx
    nb = sum(1 for x in spiky if x <= edge or x >= grid.L - edge)
    ni = len(spiky) - nb
    if nb and ni:
        return "mixed-spike"
    if nb == 2:
        return "double-boundary-spike"
    if nb == 1:
        return "boundary-spike"
    return "interior-spike"


# workers -----------------------------------------------------------------

def _simulate_job(args):
    pset, run, tr, out_dir, comment = args
    p = Params(chi=run.chi, **pset)
    grid = grid_for_spacing(p.L, tr.dx)
    t0 = time.perf_counter()
    u0 = parse_ic(run.ic, p, grid)
    cfg = SimConfig(t_end=run.t_end, dt=tr.dt, check_every=tr.check_every, snapshot_every=run.t_end / 20)
    try:
        res = simulate(u0, p, grid, cfg)
    except SimulationBlowup as exc:
        return dict(error=str(exc), seconds=time.perf_counter() - t0)
    write_snapshots(out_dir / "snapshots.csv", res, p, grid, comment)
    write_summary(out_dir / "summary.csv", res, p, grid, comment)
    return dict(u=res.final_u, steady=res.steady, t=res.t_final, seconds=time.perf_counter() - t0)


def _branch_job(args):
    pset, job, tr, out_dir, comment = args
    p = Params(chi=job.chi_start, **pset)
    grid = grid_for_spacing(p.L, tr.dx)
    t0 = time.perf_counter()
    try:
        br = trace_branch(job.k0, job.sign, (job.chi_start, job.chi_stop), job.dchi, p, grid,
                          chi_after_fold=job.chi_after_fold)
        seg = max(q.segment for q in br.points)
        fam = [(c, solve_at(br, c, p, grid, segment=seg, assess=False).u) for c in job.family]
    except (NewtonFailure, SeedingError) as exc:
        return dict(error=str(exc), seconds=time.perf_counter() - t0)
    write_branch(out_dir, br, grid, comment)
    rep = detect_spiky_points(fam, grid, p)
    write_spikes(out_dir / "spikes.csv", rep, comment)
    write_audit(out_dir / "audit.csv", fam, p, grid, comment)
    if len(rep.locations) == 1:
        fl = flattening_check(fam, rep.locations[0], grid, p)
        write_table(out_dir / "flattening.csv", ("chi", "ubar", "u_mid"),
                    list(zip(fl.chis, fl.ubar, fl.mid)), f"{comment} decreasing={fl.decreasing}")
    write_table(out_dir / "family.csv", ("chi", "x", "u"),
                [(c, x, val) for c, u in fam for x, val in zip(grid.nodes, u)], comment)
    return dict(locations=rep.locations, u=fam[-1][1], terminated=br.terminated_by,
                fold=br.fold_chi, seconds=time.perf_counter() - t0)


# writers -----------------------------------------------------------------

def write_snapshots(path, res, params: Params, grid: Grid1D, comment: str):
    rows = []
    for t, u in res.snapshots:
        v = solve_chemical(u, params, grid)
        rows.extend((t, x, a, b) for x, a, b in zip(grid.nodes, u, v))
    write_table(path, ("t", "x", "u", "v"), rows, comment)


def write_summary(path, res, params: Params, grid: Grid1D, comment: str):
    u = res.final_u
    rows = [
        ("steady", res.steady), ("t_final", res.t_final), ("last_rate", res.last_rate),
        ("sup_u", float(u.max())), ("inf_u", float(u.min())), ("u_at_0", float(u[0])),
        ("u_at_L", float(u[-1])), ("mass", grid.integrate(u)),
        ("dist_to_constant", float(np.max(np.abs(u - params.u_const)))),
    ]
    write_table(path, ("quantity", "value"), rows, comment)


def write_branch(out_dir: Path, br, grid: Grid1D, comment: str):
    write_table(out_dir / "branch.csv",
                ("chi", "u_at_0", "u_at_L", "sup_u", "inf_u", "mass", "leading_eig", "stable", "segment"),
                [(q.chi, q.u_at_0, q.u_at_L, q.sup_u, q.inf_u, q.mass, q.leading_eig, q.stable, q.segment)
                 for q in br.points],
                f"{comment} terminated_by={br.terminated_by} fold_chi={br.fold_chi}")
    write_table(out_dir / "profiles.csv", ("segment", "chi", "x", "u"),
                [(q.segment, q.chi, x, val) for q in br.points for x, val in zip(grid.nodes, q.u)], comment)


def write_spikes(path, rep, comment: str):
    rows = []
    for c in rep.candidates:
        osc = ";".join(f"{d!r}:{o!r}" for d, o in c.osc.items())
        rows.append((c.x, osc, "spiky" if c.spiky else "not-spiky"))
    write_table(path, ("x_star", "osc_by_delta", "verdict"), rows,
                f"{comment} sigma_star={rep.sigma_star!r} delta_star={rep.delta_star!r} margin={rep.margin!r}")


def write_audit(path, family, params: Params, grid: Grid1D, comment: str):
    rows = []
    for c, u in family:
        rec = theorem42_audit(u, params.with_chi(c), grid)
        rows.extend((c, cl.clause, cl.passed, cl.slack) for cl in rec.clauses)
    write_table(path, ("chi", "clause", "pass", "slack"), rows, comment)


# orchestration -----------------------------------------------------------

@dataclass
class PresetOutcome:
    name: str
    rows: list = field(default_factory=list)  # manifest rows
    out_dir: Path | None = None

    @property
    def ok(self) -> bool:
        return all(r[-2] == "ok" for r in self.rows)


MANIFEST_HEADER = ("id", "kind", "chi", "ic", "expected", "measured", "status", "detail")


def _pool_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def run_preset(preset: ExperimentPreset | str, out_root, quick: bool = False, workers: int | None = None,
               overrides: dict | None = None, branches: bool = True) -> PresetOutcome:
    """Run every job of a preset and write its artifacts under ``out_root/<name>``.

    ``overrides`` may set ``t_end_scale`` (multiplies every run's horizon).
    """
    p = PRESETS[preset] if isinstance(preset, str) else preset
    tr = tier(quick)
    workers = workers or os.cpu_count() or 1
    scale = float((overrides or {}).get("t_end_scale", 1.0))
    out = Path(out_root) / p.name
    out.mkdir(parents=True, exist_ok=True)
    base = " ".join(f"{k}={v!r}" for k, v in p.params.items())
    tier_s = f"dx={tr.dx!r} dt={tr.dt!r} check_every={tr.check_every} quick={tr.quick}"

    runs = [replace(r, t_end=r.t_end * scale) for r in p.runs]
    sim_jobs = []
    for i, r in enumerate(runs):
        d = out / "runs" / f"run{i:02d}"
        d.mkdir(parents=True, exist_ok=True)
        comment = f"preset={p.name} {base} chi={r.chi!r} ic={r.ic} t_end={r.t_end!r} {tier_s}"
        sim_jobs.append((p.params, r, tr, d, comment))
    br_jobs = []
    for j, b in enumerate(p.branches if branches else ()):
        d = out / f"branch_k{b.k0}_{'plus' if b.sign > 0 else 'minus'}"
        d.mkdir(parents=True, exist_ok=True)
        comment = (f"preset={p.name} {base} k0={b.k0} sign={b.sign} chi_start={b.chi_start!r} "
                   f"chi_stop={b.chi_stop!r} dchi={b.dchi!r} chi_after_fold={b.chi_after_fold!r} {tier_s}")
        br_jobs.append((p.params, b, tr, d, comment))

    sim_res = _pool_map(_simulate_job, sim_jobs, workers)
    br_res = _pool_map(_branch_job, br_jobs, workers)

    grid = grid_for_spacing(p.params["L"], tr.dx)
    spiky = _family_spikes(runs, sim_res, p, grid)
    outcome = PresetOutcome(p.name, out_dir=out)
    timings = []
    for i, (r, res) in enumerate(zip(runs, sim_res)):
        rid = f"run{i:02d}"
        timings.append((rid, res["seconds"]))
        if "error" in res:
            outcome.rows.append((rid, "simulate", r.chi, r.ic, r.tag, "error", "error", res["error"]))
            continue
        params = p.base_params(r.chi)
        measured = classify(res["u"], params, grid, spiky.get(i))
        detail = (f"steady={res['steady']} t_final={res['t']!r} "
                  f"sup_dist={float(np.max(np.abs(res['u'] - params.u_const))):.6g}")
        if spiky.get(i):
            detail += f" spiky_at={';'.join(repr(x) for x in spiky[i])}"
        outcome.rows.append((rid, "simulate", r.chi, r.ic, r.tag, measured,
                             "ok" if measured == r.tag else "mismatch", detail))
    for j, (b, res) in enumerate(zip(p.branches if branches else (), br_res)):
        bid = f"branch{j:02d}"
        timings.append((bid, res["seconds"]))
        ic = f"k0={b.k0} sign={b.sign:+d}"
        fam = ",".join(repr(c) for c in b.family)
        if "error" in res:
            outcome.rows.append((bid, "branch", fam, ic, b.tag, "error", "error", res["error"]))
            continue
        measured = classify(res["u"], p.base_params(b.family[-1]), grid, res["locations"])
        detail = (f"spiky_at={';'.join(repr(x) for x in res['locations'])} "
                  f"terminated_by={res['terminated']} fold_chi={res['fold']!r}")
        outcome.rows.append((bid, "branch", fam, ic, b.tag, measured,
                             "ok" if measured == b.tag else "mismatch", detail))
    write_table(out / "manifest.csv", MANIFEST_HEADER, outcome.rows, f"preset={p.name} {base} {tier_s}")
    write_table(out / "timings.csv", ("id", "seconds"), timings)
    return outcome


def _family_spikes(runs, results, preset, grid):
    """Spike locations for runs in the tail of a same-profile family (>= 3 chi values)."""
    by_ic = {}
    for i, (r, res) in enumerate(zip(runs, results)):
        if "error" not in res:
            by_ic.setdefault(r.ic, []).append((r.chi, i, res["u"]))
    out = {}
    for members in by_ic.values():
        members.sort()
        if len(members) < 3:
            continue
        fam = [(c, u) for c, _, u in members]
        rep = detect_spiky_points(fam, grid, preset.base_params(members[-1][0]))
        for _, i, _ in members[len(members) // 2:]:
            out[i] = rep.locations
    return out
