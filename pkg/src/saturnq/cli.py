"""Command line: ``saturnq verify | mesh | solve | represent | analyze``.

Exit codes: 0 success, 1 a check failed, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, audit, fem, fileio, mesh as meshmod, oracle, represent
from .config import ConfigError, RunConfig, load_config
from .qtensor import boundary_data

log = logging.getLogger("saturnq")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt_k(k: float) -> str:
    return f"{k:g}"


def _out_dir(cfg: RunConfig) -> Path:
    d = cfg.output_dir
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {d}: {exc}") from None
    return d


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    ks = tuple(args.k) if args.k else audit.K_SWEEP
    checks = audit.run_audit(ks=ks, fault=args.inject_fault, include_adjoint=not args.quick)
    records = [c.as_dict() for c in checks]
    failed = [c for c in checks if not c.passed]
    records.append({"summary": True, "checks": len(checks), "failed": len(failed)})
    if args.output:
        fileio.write_jsonl(args.output, records)
    fileio.write_jsonl(sys.stdout, records)
    for c in failed:
        print(f"FAILED {c.name} (k={c.k}): measured {c.value:.3e}, tolerance {c.tolerance:.3e}",
              file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# mesh
# ---------------------------------------------------------------------------

def cmd_mesh(args) -> int:
    cfg = _config(args)
    m = cfg.mesh.build()
    m.validate()
    report = meshmod.quality_report(m)
    report["hash"] = m.hash()
    if args.output:
        meshmod.write_msh(m, args.output)
        report["path"] = str(args.output)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _ring_row(k: float, rep: analysis.RingReport | None, note: str = "") -> list:
    if rep is None:
        return [k, "", "", "", "", "", note]
    return [k, rep.radius, rep.z_offset, rep.gap_at_ring, rep.band[0], rep.band[1], note]


RING_HEADER = ["k", "radius", "z_offset", "gap_at_ring", "band_inner", "band_outer", "note"]


def _write_maps(field: fem.QField, cfg: RunConfig, out: Path, tag: str) -> list[str]:
    written = []
    for plane, off in cfg.planes:
        fm = analysis.field_maps(field, plane, off, resolution=cfg.resolution)
        rows = []
        for (iy, ix) in np.ndindex(fm.norm.shape):
            if not fm.valid[iy, ix]:
                continue
            p = fm.points[iy, ix]
            d = fm.director[iy, ix]
            rows.append([float(p[0]), float(p[1]), float(p[2]), float(fm.norm[iy, ix]),
                         float(fm.beta[iy, ix])] + ["" if np.isnan(v) else float(v) for v in d])
        path = out / f"map_{plane}_{off:g}_{tag}.csv"
        fileio.write_table_csv(path, ["x", "y", "z", "normQ", "beta", "d1", "d2", "d3"], rows)
        written.append(str(path))
    return written


def cmd_solve(args) -> int:
    cfg = _config(args)
    ks = args.k if args.k else [cfg.k]
    m = cfg.mesh.build()
    m.validate()
    out = _out_dir(cfg)
    ring_rows, energy_log, status = [], [], EXIT_OK
    for k in ks:
        tag = f"k{_fmt_k(k)}"
        try:
            field = fem.solve_exterior_problem(m, float(k), tol=cfg.solver.tol,
                                               max_iter=cfg.solver.max_iter,
                                               preconditioner=cfg.solver.preconditioner)
        except fem.ConvergenceError as exc:
            print(f"k={k:g}: {exc}", file=sys.stderr)
            print(json.dumps({"config": cfg.echo()}, sort_keys=True), file=sys.stderr)
            energy_log.append({"k": k, "converged": False, "iterations": len(exc.history) - 1,
                               "residual": exc.history[-1]})
            status = EXIT_FAIL
            continue
        rec = {"k": k, "converged": True, "mesh_hash": m.hash(), "n_tets": m.n_tets}
        rec.update(field.info)
        energy_log.append(rec)
        if cfg.write_checkpoint:
            fem.save_checkpoint(field, out / f"solution_{tag}.csv")
        if cfg.write_vtk:
            fileio.write_vtk(out / f"solution_{tag}.vtk", m, field.full, title=f"Q-tensor field k={k:g}")
        try:
            rep = analysis.ring_radius(field, cfg.ring_threshold)
            ring_rows.append(_ring_row(k, rep))
            fileio.write_table_csv(out / f"gap_profile_{tag}.csv", ["rho", "gap"], rep.gap_profile.tolist())
        except analysis.NoRingError as exc:
            ring_rows.append(_ring_row(k, None, str(exc)))
        _write_maps(field, cfg, out, tag)
    fileio.write_table_csv(out / "ring.csv", RING_HEADER, ring_rows)
    fileio.write_jsonl(out / "energy.jsonl", energy_log)
    fileio.write_jsonl(sys.stdout, energy_log)
    return status


# ---------------------------------------------------------------------------
# represent
# ---------------------------------------------------------------------------

REPRESENT_HEADER = ["x", "y", "z", "q11", "q22", "q33", "q12", "q13", "q23", "max_delta", "status"]


def _represent_data(args, cfg: RunConfig):
    """Boundary data and a reference sampler for the chosen mode."""
    if args.mode == "analytic":
        if cfg.k != 0.0:
            raise UsageError("analytic mode needs k = 0")
        data = represent.BoundaryData(boundary_data, oracle.harmonic_neumann)
        return data, oracle.harmonic_solution, None
    if args.checkpoint is None:
        raise UsageError("checkpoint mode needs --checkpoint")
    m = cfg.mesh.build()
    field = fem.load_checkpoint(args.checkpoint, m)
    if np.isfinite(field.k) and field.k != cfg.k:
        log.warning("checkpoint k=%g differs from config k=%g; using checkpoint", field.k, cfg.k)
        cfg.k = field.k
    system = fem.assemble(m, cfg.k)
    interp = fem.neumann_interpolants(field, system)
    data = represent.BoundaryData(boundary_data, interp[meshmod.INNER], outer_radius=m.outer_radius,
                                  outer_neumann=interp[meshmod.OUTER])
    return data, lambda p: analysis.sample(field, p), m.outer_radius


def cmd_represent(args) -> int:
    cfg = _config(args)
    if not Path(args.points).exists():
        raise UsageError(f"points file not found: {args.points}")
    pts = fileio.read_points_csv(args.points)
    rows = []
    if len(pts):
        data, reference, R = _represent_data(args, cfg)
        quad = represent.build_quadrature(args.n_theta, 2 * args.n_theta)
        for p in pts:
            r = float(np.linalg.norm(p))
            if r < 1.0 + args.margin or (R is not None and r > R - args.margin):
                log.warning("point %s inside the evaluation margin; skipped", p.tolist())
                rows.append([float(v) for v in p] + [""] * 7 + ["skipped_margin"])
                continue
            Q = represent.evaluate_tensor(p, data, cfg.k, quad, margin=args.margin)
            delta = float(np.max(np.abs(Q - reference(p))))
            rows.append([float(v) for v in p] + fileio.tensor_row(Q) + [delta, "ok"])
    target = Path(args.output) if args.output else _out_dir(cfg) / "represent.csv"
    fileio.write_table_csv(target, REPRESENT_HEADER, rows)
    deltas = [r[9] for r in rows if r[-1] == "ok"]
    summary = {"points": len(rows), "evaluated": len(deltas),
               "max_delta": max(deltas) if deltas else None, "output": str(target)}
    if args.tolerance is not None and deltas:
        summary["tolerance"] = args.tolerance
        summary["passed"] = max(deltas) <= args.tolerance
    print(json.dumps(summary, sort_keys=True))
    return EXIT_FAIL if summary.get("passed") is False else EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = _config(args)
    m = cfg.mesh.build()
    if not Path(args.checkpoint).exists():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    field = fem.load_checkpoint(args.checkpoint, m)
    if not np.isfinite(field.k):
        field.k = cfg.k
    out = _out_dir(cfg)
    tag = f"k{_fmt_k(field.k)}"
    result = {"k": field.k, "energy": field.energy()}
    status = EXIT_OK
    try:
        rep = analysis.ring_radius(field, cfg.ring_threshold)
        result["ring"] = rep.as_dict()
    except analysis.NoRingError as exc:
        result["ring"] = None
        result["note"] = str(exc)
        status = EXIT_FAIL
    dirs = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 1.0]])
    radii = np.linspace(1.0, m.outer_radius, 46)
    prof = analysis.decay_profile(field, dirs, radii)
    fileio.write_table_csv(out / f"decay_{tag}.csv", ["radius", "equatorial", "polar", "diagonal"],
                           np.column_stack([radii, prof.T]).tolist())
    result["maps"] = _write_maps(field, cfg, out, tag)
    full = field.full
    result["max_normQ"] = float(np.max(np.sqrt(np.einsum("nij,nij->n", full, full))))
    print(json.dumps(result, sort_keys=True))
    return status


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _config(args) -> RunConfig:
    overrides = {}
    for key in ("n_surface", "n_radial", "outer_radius", "grading", "mesh_path"):
        overrides[key] = getattr(args, key, None)
    if getattr(args, "output_dir", None):
        overrides["output_dir"] = Path(args.output_dir)
    k = getattr(args, "k", None)
    if isinstance(k, float):
        overrides["k"] = k
    elif isinstance(k, list) and len(k) == 1:
        overrides["k"] = k[0]
    return load_config(getattr(args, "config", None), overrides)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--mesh", dest="mesh_path", help="Gmsh 2.2 ASCII mesh (overrides the generator)")
    p.add_argument("--n-surface", type=int, dest="n_surface")
    p.add_argument("--n-radial", type=int, dest="n_radial")
    p.add_argument("--outer-radius", type=float, dest="outer_radius")
    p.add_argument("--grading", type=float)
    p.add_argument("--output-dir", dest="output_dir")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="saturnq", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the analytic audit suite")
    p.add_argument("--k", type=float, nargs="+", help="elastic ratios (default -0.9 0 1 5 20)")
    p.add_argument("--quick", action="store_true", help="skip the finite-difference adjoint checks")
    p.add_argument("--output", help="also write the JSON-lines report here")
    p.add_argument("--inject-fault", choices=audit.FAULTS, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("mesh", help="generate or read a mesh and report its quality")
    _add_config_args(p)
    p.add_argument("--output", help="write the mesh as Gmsh 2.2 ASCII")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", help="solve the shifted problem and write fields")
    _add_config_args(p)
    p.add_argument("--k", type=float, nargs="+", help="elastic ratio(s); overrides the config")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("represent", help="evaluate the boundary representation formula")
    _add_config_args(p)
    p.add_argument("--points", required=True, help="CSV of x,y,z")
    p.add_argument("--output", help="output CSV (default <output-dir>/represent.csv)")
    p.add_argument("--mode", choices=("analytic", "checkpoint"), default="analytic")
    p.add_argument("--checkpoint", help="solution checkpoint for checkpoint mode")
    p.add_argument("--k", type=float)
    p.add_argument("--n-theta", type=int, default=64, help="Gauss points in cos(theta); n_phi = 2 n_theta")
    p.add_argument("--margin", type=float, default=represent.DEFAULT_MARGIN)
    p.add_argument("--tolerance", type=float, help="fail (exit 1) if max delta exceeds this")
    p.set_defaults(func=cmd_represent)

    p = sub.add_parser("analyze", help="ring, decay profiles and maps from a checkpoint")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=float)
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, FileNotFoundError, meshmod.MeshFormatError,
            fem.CheckpointError, OSError) as exc:
        print(f"saturnq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"saturnq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
