"""Command-line entry point: ``chemotaxis-lab <subcommand> ...``.

Output goes under ``--out`` or, when absent, under ``$CHEMOTAXIS_LAB_OUT``
(default ``./runs``).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import presets as pr
from .bifurcation import DegenerateBifurcation, pitchfork_coefficients
from .config import ConfigError, RunDescription, load_config, parse_config, parse_ic
from .continuation import NewtonFailure, SeedingError, trace_branch
from .diagnostics import detect_spiky_points
from .galerkin import integrate_galerkin
from .integrator import SimConfig, SimulationBlowup, simulate
from .model import Params, grid_for_spacing, project_to_modes, read_table, write_table
from .stability import analyze

ENV_OUT = "CHEMOTAXIS_LAB_OUT"


def _out_root(args) -> Path:
    return Path(args.out or os.environ.get(ENV_OUT, "runs"))


def _add_params(sp):
    sp.add_argument("--config", help="key=value configuration file (flags win)")
    sp.add_argument("--chi", type=float, required=False)
    for name in ("a", "b", "mu", "nu", "L"):
        sp.add_argument(f"--{name}", type=float)


def _add_sim(sp):
    sp.add_argument("--n-points", type=int, dest="n_points")
    sp.add_argument("--dx", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-end", type=float, dest="t_end")
    sp.add_argument("--steady-tol", type=float, dest="steady_tol")
    sp.add_argument("--snapshot-every", type=float, dest="snapshot_every")
    sp.add_argument("--ic", help="e.g. '1+0.5*cos(1)' (cos(k) = cos(k pi x/L)) or csv:<path>")


def _resolve(args, quick_grid=True) -> RunDescription:
    keys = ("chi", "a", "b", "mu", "nu", "L", "n_points", "dx", "dt", "t_end", "steady_tol",
            "snapshot_every", "ic", "modes")
    over = {k: getattr(args, k, None) for k in keys}
    if quick_grid and args.quick:
        over["dx"] = over["dx"] or pr.QUICK_DX
        over["dt"] = over["dt"] or pr.QUICK_DT
    if args.config:
        return load_config(args.config, over)
    if over["chi"] is None:
        raise ConfigError("missing required key 'chi' (pass --chi or --config)")
    return parse_config("", "<flags>", over)


def _run_dir(args, name) -> Path:
    d = _out_root(args) / name
    d.mkdir(parents=True, exist_ok=True)
    return d


# subcommands -------------------------------------------------------------

def cmd_analyze(args):
    desc = _resolve(args, quick_grid=False)
    p = desc.params()
    rep = analyze(p, args.k_max)
    w = sys.stdout
    w.write(f"# {desc.summary()}\n")
    w.write("k,lambda_k,chi_k_star\n")
    for k in range(args.k_max + 1):
        cs = repr(float(rep.chi_stars[k - 1])) if k else ""
        w.write(f"{k},{float(rep.lambdas[k])!r},{cs}\n")
    w.write(f"chi_star={rep.chi_star:.6f}, k={rep.k_star_index}, verdict={rep.verdict}\n")
    return 0


def cmd_bifurcate(args):
    if args.chi is None and not args.config:
        args.chi = 1.0  # coefficients do not depend on chi
    desc = _resolve(args, quick_grid=False)
    p = desc.params()
    sys.stdout.write(f"# {desc.summary()}\n")
    sys.stdout.write("k0,chi_k0_star,alpha,beta,direction\n")
    for k in range(1, args.k_max + 1):
        try:
            pd = pitchfork_coefficients(k, p)
        except DegenerateBifurcation as exc:
            sys.stdout.write(f"{k},,,,degenerate ({exc})\n")
            continue
        sys.stdout.write(f"{k},{pd.chi_k0_star!r},{pd.alpha_k0!r},{pd.beta_k0!r},{pd.direction}\n")
    return 0


def _sim_setup(args):
    desc = _resolve(args)
    p = desc.params()
    grid = desc.grid()
    ics = desc.ics()
    u0 = parse_ic(ics[0], p, grid)
    return desc, p, grid, u0


def cmd_simulate(args):
    desc, p, grid, u0 = _sim_setup(args)
    d = _run_dir(args, args.name or "simulate")
    cfg = SimConfig(t_end=desc.t_end, dt=desc.dt, steady_tol=desc.steady_tol,
                    check_every=desc.check_every, snapshot_every=desc.snapshot_every)
    t0 = time.perf_counter()
    try:
        res = simulate(u0, p, grid, cfg)
    except SimulationBlowup as exc:
        print(f"blowup: {exc}", file=sys.stderr)
        return 3
    comment = desc.summary()
    pr.write_snapshots(d / "snapshots.csv", res, p, grid, comment)
    pr.write_summary(d / "summary.csv", res, p, grid, comment)
    write_table(d / "timings.csv", ("id", "seconds"), [("simulate", time.perf_counter() - t0)])
    print(f"steady={res.steady} t_final={res.t_final:.6g} sup_u={res.final_u.max():.6g} -> {d}")
    return 0


def cmd_galerkin(args):
    desc, p, grid, u0 = _sim_setup(args)
    d = _run_dir(args, args.name or "galerkin")
    K = desc.modes
    m0 = project_to_modes(u0, grid, K)
    m0[0] -= p.u_const
    every = desc.snapshot_every or desc.t_end / 20
    tr = integrate_galerkin(m0, p, desc.dt, desc.t_end, record_every=every)
    rows = [(t, k, c) for t, m in zip(tr.times, tr.modes) for k, c in enumerate(m)]
    write_table(d / "modes.csv", ("t", "k", "u_k"), rows, f"{desc.summary()} blowup={tr.blowup}")
    print(f"blowup={tr.blowup} t_final={tr.times[-1]:.6g} u_1={tr.final[1]:.6g} -> {d}")
    return 3 if tr.blowup else 0


def cmd_branch(args):
    if args.chi is None:
        args.chi = args.chi_min
    desc = _resolve(args)
    p = desc.params()
    grid = desc.grid()
    d = _run_dir(args, args.name or f"branch_k{args.k0}_{'plus' if args.sign > 0 else 'minus'}")
    start, stop = (args.chi_max, args.chi_min) if args.reverse else (args.chi_min, args.chi_max)
    try:
        br = trace_branch(args.k0, args.sign, (start, stop), args.dchi, p, grid,
                          chi_after_fold=args.chi_after_fold, assess=not args.no_stability)
    except (SeedingError, NewtonFailure) as exc:
        print(f"branch failed: {exc}", file=sys.stderr)
        return 2
    comment = (f"{desc.summary()} k0={args.k0} sign={args.sign} dchi={args.dchi!r} "
               f"chi_after_fold={args.chi_after_fold!r}")
    pr.write_branch(d, br, grid, comment)
    print(f"{len(br.points)} points, terminated_by={br.terminated_by}, fold_chi={br.fold_chi} -> {d}")
    return 0


def cmd_spikes(args):
    src = Path(args.dir)
    header, rows = read_table(src / "profiles.csv")
    desc = _resolve(args, quick_grid=False) if (args.chi or args.config) else None
    data = {}
    for seg, chi, x, u in rows:
        data.setdefault((int(seg), float(chi)), []).append((float(x), float(u)))
    keys = sorted(data)
    seg = max(k[0] for k in keys) if args.segment is None else args.segment
    avail = sorted(c for s, c in keys if s == seg)
    chis = args.chis or avail[-3:]
    fam = []
    for c in chis:
        near = min(avail, key=lambda a: abs(a - c))
        xu = np.array(data[(seg, near)])
        fam.append((near, xu[:, 1]))
    L = float(xu[-1, 0])
    grid = grid_for_spacing(L, float(xu[1, 0] - xu[0, 0]))
    base = desc.params(fam[-1][0]) if desc else Params(
        chi=fam[-1][0], a=args.a or 1.0, b=args.b or 1.0, mu=args.mu or 1.0, nu=args.nu or 1.0, L=L)
    rep = detect_spiky_points(fam, grid, base, sigma_star=args.sigma_star, delta_star=args.delta_star)
    comment = f"source={src} family={','.join(repr(c) for c, _ in fam)} params={base.as_dict()}"
    pr.write_spikes(src / "spikes.csv", rep, comment)
    pr.write_audit(src / "audit.csv", fam, base, grid, comment)
    print(f"spiky points: {rep.locations} -> {src / 'spikes.csv'}")
    return 0


def cmd_preset(args):
    names = list(pr.PRESETS) if args.preset == "all" else [args.preset]
    status = 0
    for n in names:
        over = {"t_end_scale": args.t_end_scale} if args.t_end_scale else None
        res = pr.run_preset(n, _out_root(args), quick=args.quick, workers=args.workers, overrides=over,
                            branches=not args.no_branches)
        bad = [r for r in res.rows if r[-2] != "ok"]
        print(f"{n}: {len(res.rows) - len(bad)}/{len(res.rows)} ok -> {res.out_dir}")
        for r in bad:
            print(f"  {r[0]} chi={r[2]} ic={r[3]} expected={r[4]} measured={r[5]}")
        if bad:
            status = 1
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemotaxis-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--out", help=f"output root (default ${ENV_OUT} or ./runs)")
    ap.add_argument("--quick", action="store_true", help="coarse grid dx=0.02, dt=2e-4")
    ap.add_argument("--workers", type=int, default=None, help="parallel runs (default: all cores)")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("analyze", help="eigenvalues and thresholds of the constant state")
    _add_params(sp)
    sp.add_argument("--k-max", type=int, default=10, dest="k_max")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("bifurcate", help="pitchfork coefficients for k0 = 1..K")
    _add_params(sp)
    sp.add_argument("--k-max", type=int, default=5, dest="k_max")
    sp.set_defaults(func=cmd_bifurcate)

    for name, fn in (("simulate", cmd_simulate), ("galerkin", cmd_galerkin)):
        sp = sub.add_parser(name, help=f"{name} one initial profile")
        _add_params(sp)
        _add_sim(sp)
        sp.add_argument("--name", help="subdirectory under the output root")
        if name == "galerkin":
            sp.add_argument("--modes", type=int, help="truncation K (default 32)")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("branch", help="continue a pitchfork branch in chi")
    _add_params(sp)
    _add_sim(sp)
    sp.add_argument("--k0", type=int, required=True)
    sp.add_argument("--sign", type=int, choices=(1, -1), default=1)
    sp.add_argument("--chi-min", type=float, required=True, dest="chi_min")
    sp.add_argument("--chi-max", type=float, required=True, dest="chi_max")
    sp.add_argument("--dchi", type=float, default=0.1)
    sp.add_argument("--reverse", action="store_true", help="start at chi-max and move down")
    sp.add_argument("--chi-after-fold", type=float, dest="chi_after_fold")
    sp.add_argument("--no-stability", action="store_true", dest="no_stability")
    sp.add_argument("--name")
    sp.set_defaults(func=cmd_branch)

    sp = sub.add_parser("spikes", help="spike detection and audit on a branch directory")
    _add_params(sp)
    sp.add_argument("--dir", required=True, help="directory holding profiles.csv")
    sp.add_argument("--chis", type=float, nargs="+")
    sp.add_argument("--segment", type=int)
    sp.add_argument("--sigma-star", type=float, dest="sigma_star")
    sp.add_argument("--delta-star", type=float, dest="delta_star")
    sp.set_defaults(func=cmd_spikes)

    sp = sub.add_parser("preset", help="run an experiment preset")
    sp.add_argument("preset", choices=list(pr.PRESETS) + ["all"])
    sp.add_argument("--t-end-scale", type=float, dest="t_end_scale")
    sp.add_argument("--no-branches", action="store_true", dest="no_branches")
    sp.set_defaults(func=cmd_preset)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
