"""Command-line entry points.

    ndfm run <config> [--outdir DIR]
    ndfm convergence --theta V --meshes 20,40,80,160 [--odd]
    ndfm consistency <config> --deltas 1e-2,1e-3,...
    ndfm oracle <config> --resolution N --width W [--outdir DIR]
    ndfm degenerate-check <config>

Exit status: 0 on success, 2 when a solver fails to converge or a
degeneration check finds disagreement, 1 on bad input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import postproc
from .driver import (
    classical_dfm_assemble,
    consistency_study,
    convergence_study,
    load_scenario,
    rasterize_equi_dim,
    run_scenario,
    solve_problem,
)
from .driver.scenario import build_problem, solver_settings
from .linsolve import solve_cg


def _parse_args(argv):
    parser = argparse.ArgumentParser(prog="ndfm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve a scenario and write its outputs")
    p_run.add_argument("config")
    p_run.add_argument("--outdir", default="out")

    p_conv = sub.add_parser("convergence", help="refinement study against the analytic solution")
    p_conv.add_argument("--theta", type=float, required=True)
    p_conv.add_argument("--meshes", required=True, help="comma-separated cell counts, e.g. 20,40,80")
    p_conv.add_argument("--odd", action="store_true", help="shift every mesh size by +1")

    p_cons = sub.add_parser("consistency", help="perturb a conforming network and track the drift")
    p_cons.add_argument("config")
    p_cons.add_argument("--deltas", required=True, help="comma-separated perturbation sizes")

    p_oracle = sub.add_parser("oracle", help="solve the rasterized fully resolved reference")
    p_oracle.add_argument("config")
    p_oracle.add_argument("--resolution", type=int, required=True)
    p_oracle.add_argument("--width", type=float, required=True)
    p_oracle.add_argument("--outdir", default="out")

    p_degen = sub.add_parser(
        "degenerate-check", help="compare against the classical conforming scheme"
    )
    p_degen.add_argument("config")

    return parser.parse_args(argv)


def _cmd_run(args):
    cfg = load_scenario(args.config)
    result = run_scenario(cfg, outdir=args.outdir)
    r = result.report
    print(
        f"{cfg.name}: {len(result.field.values)} vertices, "
        f"{r.iterations} iterations, relative residual {r.relative_residual:.3e}"
    )
    for path in result.written:
        print(f"  wrote {path}")
    return 0 if r.converged else 2


def _cmd_convergence(args):
    meshes = [int(v) for v in args.meshes.split(",")]
    if args.odd:
        meshes = [n + 1 for n in meshes]
    table = convergence_study(args.theta, meshes)
    print(table.to_text())
    return 0


def _cmd_consistency(args):
    cfg = load_scenario(args.config)
    pb = build_problem(cfg)
    deltas = [float(v) for v in args.deltas.split(",")]
    table = consistency_study(pb, [(d, d, d) for d in deltas])
    print(table.to_text())
    return 0


def _cmd_oracle(args):
    cfg = load_scenario(args.config)
    pb = rasterize_equi_dim(cfg, args.resolution, args.width)
    tol, maxit = solver_settings(cfg)
    fld, report, _ = solve_problem(pb, tol=tol, maxit=maxit)
    print(
        f"{cfg.name} oracle: {len(pb.mesh.cells)} cells, "
        f"{report.iterations} iterations, relative residual {report.relative_residual:.3e}"
    )
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for k, sl in enumerate(cfg.data.get("output", {}).get("slices", [])):
        profile = postproc.slice_profile(fld, sl["from"], sl["to"], int(sl["n"]))
        path = outdir / f"{cfg.name}_oracle_slice_{k}.csv"
        path.write_text(postproc.slice_to_csv(profile), encoding="utf-8")
        print(f"  wrote {path}")
    path = outdir / f"{cfg.name}_oracle_field.csv"
    path.write_text(postproc.export_field(fld, "csv-points"), encoding="utf-8")
    print(f"  wrote {path}")
    return 0 if report.converged else 2


def _cmd_degenerate_check(args):
    cfg = load_scenario(args.config)
    pb = build_problem(cfg)
    from .assembly import assemble

    sys_n = assemble(pb)
    sys_c = classical_dfm_assemble(pb)
    scale = max(abs(sys_n.A).max(), abs(sys_c.A).max())
    mat_diff = abs(sys_n.A - sys_c.A).max() / scale
    xn, _ = solve_cg(sys_n, tol=1e-13)
    xc, _ = solve_cg(sys_c, tol=1e-13)
    pn = sys_n.expand(xn)
    pc = sys_c.expand(xc)
    sol_diff = float(np.abs(pn - pc).max() / max(np.abs(pn).max(), 1e-300))
    print(f"matrix entrywise relative difference: {mat_diff:.3e}")
    print(f"solution max-norm relative difference: {sol_diff:.3e}")
    ok = mat_diff <= 1e-12 and sol_diff <= 1e-10
    print("agreement: " + ("yes" if ok else "NO"))
    return 0 if ok else 2


def main(argv=None):
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    handlers = {
        "run": _cmd_run,
        "convergence": _cmd_convergence,
        "consistency": _cmd_consistency,
        "oracle": _cmd_oracle,
        "degenerate-check": _cmd_degenerate_check,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
