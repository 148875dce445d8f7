"""Command-line front end.

Subcommands: model (pure model-space quantities), surface (mesh generation
and ingestion), quotients, capacity, exit-time, ends, tone, and verify (the
full check suite).  Output goes to <outdir>/<run-name>/ as report.json,
curves.csv, mesh.off and meta.json; identical configurations produce
byte-identical report.json (wall-clock data lives only in meta.json).

Flag values override --config file entries, which override defaults.  Exit
codes: 0 clean, 1 failed checks (or inconclusive under --strict), 2 usage,
3 computation error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import dgeom, harness, surfaces
from .errors import ExcompError
from .modelspace import ModelSpace, QuadratureConfig, WarpingSpec
from .harness import FAIL, INCONCLUSIVE, PASS, VerificationReport, _json_safe


def _parse_grid(spec: str) -> np.ndarray:
    try:
        a, b, n = spec.split(":")
        grid = np.linspace(float(a), float(b), int(n))
    except ValueError:
        raise ExcompError(f"grid spec must be a:b:n, got {spec!r}")
    if len(grid) < 2 or grid[0] <= 0 or grid[-1] <= grid[0]:
        raise ExcompError(f"grid bounds must be positive and increasing, got {spec!r}")
    return grid


def _parse_pair(spec: str, what: str) -> tuple[float, float]:
    try:
        a, b = spec.split(":")
        return float(a), float(b)
    except ValueError:
        raise ExcompError(f"{what} must be a:b, got {spec!r}")


def make_model(dim: int, warp: str, lam: float = math.inf) -> ModelSpace:
    warp = warp.strip()
    if warp.startswith("b="):
        spec = WarpingSpec.space_form(float(warp[2:]))
    elif warp == "r":
        spec = WarpingSpec.space_form(0.0)
    else:
        spec = WarpingSpec.custom(warp, lam=lam)
    return ModelSpace(dim, spec)


def make_surface(args) -> surfaces.TriMesh:
    pole = tuple(float(x) for x in args.pole.split(","))
    if len(pole) != 3:
        raise ExcompError(f"pole must be x,y,z, got {args.pole!r}")
    if args.mesh:
        if not os.path.exists(args.mesh):
            raise ExcompError(f"mesh file not found: {args.mesh}")
        return surfaces.load_mesh(args.mesh, fmt=args.format, pole=pole)
    if not args.surface:
        raise ExcompError("either --surface or --mesh is required")
    res = args.res.split(":")
    nu = int(res[0])
    nv = int(res[1]) if len(res) > 1 else nu
    surf = surfaces.builtin(args.surface, a=args.a, c=args.c, cover_radius=args.cover)
    refine = tuple(float(x) for x in args.refine.split(",")) if args.refine else ()
    return surfaces.tessellate(surf, nu, nv, refine_near=refine, pole=pole)


def _model_flags(p: argparse.ArgumentParser):
    p.add_argument("--dim", type=int, default=None, help="model dimension m >= 2")
    p.add_argument("--warp", default=None,
                   help="warping function: expression in r, or b=<curvature>")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="domain bound for custom warping functions (default: infinity)")


def _surface_flags(p: argparse.ArgumentParser):
    p.add_argument("--surface", choices=surfaces.BUILTIN_NAMES, default=None)
    p.add_argument("--a", type=float, default=None, help="catenoid neck radius")
    p.add_argument("--c", type=float, default=None, help="helicoid pitch")
    p.add_argument("--cover", type=float, default=None,
                   help="extrinsic radius the window must cover")
    p.add_argument("--res", default=None, help="grid resolution NU[:NV]")
    p.add_argument("--refine", default=None, help="comma list of radii to refine near")
    p.add_argument("--mesh", default=None, help="path to an OFF/OBJ mesh to ingest")
    p.add_argument("--format", choices=("off", "obj"), default=None)
    p.add_argument("--pole", default=None, help="pole position x,y,z")


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="JSON file with default flag values")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--name", default=None, help="run name (subdirectory)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--strict", action="store_true", default=None,
                   help="inconclusive checks also fail the run")
    p.add_argument("--quad-abs-tol", type=float, default=None)
    p.add_argument("--quad-rel-tol", type=float, default=None)


_DEFAULTS = {
    "dim": 2, "warp": "r", "lam": math.inf,
    "a": 1.0, "c": 1.0, "cover": None, "res": "128", "refine": None,
    "mesh": None, "format": None, "pole": "0,0,0", "surface": None,
    "out": None, "name": None, "threads": None, "strict": False,
    "quad_abs_tol": 1e-10, "quad_rel_tol": 1e-10,
    "grid": None, "capacity": None, "exit_time": None,
    "rho": None, "R": None, "t": None, "R0": None, "truncation": "reflect",
}


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Layer flag values over --config entries over defaults."""
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise ExcompError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            cfg = json.load(fh)
        for key, val in cfg.items():
            merged[key.replace("-", "_")] = val
    for key, val in vars(args).items():
        if val is not None:
            merged[key] = val
    out = merged.get("out") or os.environ.get("EXCOMP_OUTDIR") or "runs"
    merged["out"] = out
    if merged.get("threads") is None:
        merged["threads"] = int(os.environ.get("EXCOMP_THREADS", os.cpu_count() or 1))
    ns = argparse.Namespace(**merged)
    ns.command = args.command
    return ns


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excomp",
        description="model-space comparison quantities and discrete verification "
                    "on triangulated minimal surfaces")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="model-space quantities (no mesh)")
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--grid", default=None, help="radius grid a:b:n for the CSV table")
    p.add_argument("--capacity", default=None, help="annulus rho:R")
    p.add_argument("--exit-time", dest="exit_time", default=None,
                   help="ball radius R or R:r for a start radius")

    p = sub.add_parser("surface", help="generate or ingest a mesh; writes OFF + sidecar")
    _surface_flags(p)
    _common_flags(p)

    p = sub.add_parser("quotients", help="volume and flux quotient curves")
    _surface_flags(p)
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--grid", default=None)

    p = sub.add_parser("capacity", help="discrete vs model capacity of an annulus")
    _surface_flags(p)
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--truncation", choices=("reflect", "error"), default=None)

    p = sub.add_parser("exit-time", help="discrete vs model mean exit time of a ball")
    _surface_flags(p)
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--R", type=float, default=None)

    p = sub.add_parser("ends", help="end count against the volume bound")
    _surface_flags(p)
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--grid", default=None)

    p = sub.add_parser("tone", help="fundamental tone bounds (model, optionally mesh)")
    _surface_flags(p)
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--R0", type=float, default=None)
    p.add_argument("--grid", default=None)

    p = sub.add_parser("verify", help="full comparison suite on one surface")
    _surface_flags(p)
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--R0", type=float, default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--truncation", choices=("reflect", "error"), default=None)
    return parser


def _quad(args) -> QuadratureConfig:
    return QuadratureConfig(abs_tol=args.quad_abs_tol, rel_tol=args.quad_rel_tol)


def _rundir(args) -> Path:
    name = args.name or args.command
    path = Path(args.out) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_outputs(args, report: VerificationReport, mesh=None, started=None):
    rundir = _rundir(args)
    (rundir / "report.json").write_text(report.to_json() + "\n")
    if report.curves:
        lines = ["R [ambient length],vol_quotient [1],flux_quotient [1]"]
        grid = report.curves["grid"]
        vol = report.curves["vol_quotient"]
        flx = report.curves["flux_quotient"]
        for i in range(len(grid)):
            lines.append(f"{grid[i]!r},{vol[i]!r},{flx[i]!r}")
        (rundir / "curves.csv").write_text("\n".join(lines) + "\n")
    if mesh is not None:
        mesh.save_off(rundir / "mesh.off")
    meta = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "runtime_sec": None if started is None else time.perf_counter() - started,
        "versions": {"python": sys.version.split()[0], "numpy": np.__version__},
    }
    (rundir / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return rundir


def _print_checks(report: VerificationReport):
    for c in report.checks:
        mark = {PASS: "PASS", FAIL: "FAIL", INCONCLUSIVE: "INCONCLUSIVE"}[c.verdict]
        print(f"[{mark}] {c.check_id}: {c.statement}"
              + (f" ({c.notes})" if c.notes else ""))


def _exit_code(args, report: VerificationReport) -> int:
    counts = report.counts()
    if counts[FAIL]:
        return 1
    if args.strict and counts[INCONCLUSIVE]:
        return 1
    return 0


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_model(args) -> int:
    quad = _quad(args)
    model = make_model(args.dim, args.warp, args.lam)
    scalars: dict = {"dim": model.m, "warp": model.warp.describe(), "V0": model.V0}
    if math.isinf(model.warp.lam):
        parab = model.parabolicity(quad)
        scalars["parabolicity"] = parab.to_dict()
        grid_spec = args.grid or "0.5:30:100"
        grid = _parse_grid(grid_spec)
        scalars["tone"] = model.tone_upper_limit(grid, quad).to_dict()
        scalars["cheeger"] = model.cheeger_bound(grid, quad).to_dict()
        scalars["ends_coefficient"] = model.ends_coefficient(grid, quad).to_dict()
    if args.capacity:
        rho, R = _parse_pair(args.capacity, "--capacity")
        scalars["capacity"] = model.capacity(rho, R, quad)
        print(f"capacity({rho}, {R}) = {scalars['capacity']:.6g}")
    if args.exit_time:
        parts = str(args.exit_time).split(":")
        R = float(parts[0])
        r = float(parts[1]) if len(parts) > 1 else 0.0
        scalars["exit_time"] = model.mean_exit(R, r, quad)
        print(f"mean_exit({R}, start={r}) = {scalars['exit_time']:.6g}")
    report = VerificationReport([], scalars=scalars, config=_config_dict(args))
    rundir = _rundir(args)
    (rundir / "report.json").write_text(report.to_json() + "\n")
    if args.grid:
        grid = _parse_grid(args.grid)
        lines = ["r [length],w [length],eta [1/length],volS [length^(m-1)],"
                 "volB [length^m],q [length],q_eta [1]"]
        for r in grid:
            r = float(r)
            w = model.warp.w(r)
            eta = model.eta(r)
            vs = model.vol_sphere(r)
            vb = model.vol_ball(r, quad)
            q = vb / vs
            lines.append(f"{r!r},{w!r},{eta!r},{vs!r},{vb!r},{q!r},{q * eta!r}")
        (rundir / "model.csv").write_text("\n".join(lines) + "\n")
    print(json.dumps(_json_safe(scalars), sort_keys=True, indent=2))
    return 0


def _cmd_surface(args) -> int:
    mesh = make_surface(args)
    rundir = _rundir(args)
    mesh.save_off(rundir / "mesh.off")
    sidecar = {
        "name": mesh.name,
        "pole": list(map(float, mesh.pole)),
        "vertices": len(mesh.verts),
        "faces": len(mesh.faces),
        "max_radius": mesh.max_r(),
        "minimality_residual_p95": surfaces.minimality_residual(mesh),
    }
    (rundir / "mesh.json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
    print(json.dumps(sidecar, sort_keys=True, indent=2))
    return 0


def _curve_payload(curve: harness.QuotientCurve) -> dict:
    return {
        "grid": [float(x) for x in curve.grid],
        "vol_quotient": [float(x) for x in curve.vol_quot],
        "flux_quotient": [float(x) for x in curve.flux_quot],
    }


def _cmd_quotients(args) -> int:
    started = time.perf_counter()
    quad = _quad(args)
    model = make_model(args.dim, args.warp, args.lam)
    mesh = make_surface(args)
    grid = _parse_grid(args.grid or "0.5:3:8")
    curve = harness.quotient_curves(mesh, model, grid, threads=args.threads, quad=quad)
    report = VerificationReport([], config=_config_dict(args))
    gates = harness.comparison_gates(model, float(grid[-1]), quad)
    report.extend(harness.gate_verdicts(
        gates, harness.verify_isoperimetric(curve) + [harness.volume_flux_tail(curve)]))
    report.curves = _curve_payload(curve)
    report.scalars = {"w_volume_estimate": curve.w_volume_estimate(),
                      "w_flux_estimate": curve.w_flux_estimate(),
                      "suprema_stable": curve.stable()}
    _write_outputs(args, report, mesh, started)
    _print_checks(report)
    return _exit_code(args, report)


def _cmd_capacity(args) -> int:
    started = time.perf_counter()
    quad = _quad(args)
    model = make_model(args.dim, args.warp, args.lam)
    mesh = make_surface(args)
    if args.rho is None or args.R is None:
        raise ExcompError("--rho and --R are required")
    report = VerificationReport([], config=_config_dict(args))
    report.extend(harness.verify_capacity_sandwich(
        mesh, model, args.rho, args.R, truncation=args.truncation, quad=quad))
    cap = dgeom.capacity_discrete(dgeom.clip(mesh, args.rho, args.R),
                                  truncation=args.truncation)
    report.scalars = {
        "capacity_discrete": cap.capacity,
        "effective_resistance": cap.effective_resistance,
        "capacity_model": model.capacity(args.rho, args.R, quad),
    }
    _write_outputs(args, report, mesh, started)
    _print_checks(report)
    print(f"capacity: discrete {cap.capacity:.6g}, model "
          f"{report.scalars['capacity_model']:.6g}")
    return _exit_code(args, report)


def _cmd_exit_time(args) -> int:
    started = time.perf_counter()
    quad = _quad(args)
    model = make_model(args.dim, args.warp, args.lam)
    mesh = make_surface(args)
    if args.R is None:
        raise ExcompError("--R is required")
    report = VerificationReport([], config=_config_dict(args))
    report.extend(harness.exit_time_comparison(mesh, model, args.R, quad=quad))
    _write_outputs(args, report, mesh, started)
    _print_checks(report)
    return _exit_code(args, report)


def _cmd_ends(args) -> int:
    started = time.perf_counter()
    quad = _quad(args)
    model = make_model(args.dim, args.warp, args.lam)
    mesh = make_surface(args)
    if args.R is None or args.t is None:
        raise ExcompError("--R and --t are required")
    curve = None
    if args.grid:
        curve = harness.quotient_curves(mesh, model, _parse_grid(args.grid),
                                        threads=args.threads, quad=quad)
    ends = harness.ends_bound(mesh, model, args.R, args.t, curve=curve, quad=quad)
    report = VerificationReport(list(ends.checks), scalars=ends.to_dict(),
                                config=_config_dict(args))
    if curve is not None:
        report.curves = _curve_payload(curve)
    _write_outputs(args, report, mesh, started)
    _print_checks(report)
    print(f"ends: count {ends.count}, bound {ends.bound:.6g}")
    return _exit_code(args, report)


def _cmd_tone(args) -> int:
    started = time.perf_counter()
    quad = _quad(args)
    model = make_model(args.dim, args.warp, args.lam)
    mesh = make_surface(args) if (args.surface or args.mesh) else None
    grid = _parse_grid(args.grid or "0.5:30:100")
    tone = harness.tone_report(mesh, model, args.R0 or float(grid[0]), grid, quad=quad)
    report = VerificationReport(list(tone.checks), scalars=tone.to_dict(),
                                config=_config_dict(args))
    _write_outputs(args, report, mesh, started)
    _print_checks(report)
    print(f"tone: lower {tone.lower:.6g}, upper {tone.upper:.6g}")
    return _exit_code(args, report)


def _cmd_verify(args) -> int:
    started = time.perf_counter()
    quad = _quad(args)
    model = make_model(args.dim, args.warp, args.lam)
    mesh = make_surface(args)
    window = mesh.r[mesh.tags == surfaces.TAG_TRUNCATION]
    reach = float(window.min()) if len(window) else mesh.max_r()
    grid = _parse_grid(args.grid) if args.grid else np.linspace(
        reach / 20.0, reach * 0.95, 10)
    rho = args.rho if args.rho is not None else float(grid[0])
    R = args.R if args.R is not None else float(grid[len(grid) // 2])
    t = args.t if args.t is not None else float(grid[-1])
    R0 = args.R0 if args.R0 is not None else rho

    report = VerificationReport([], config=_config_dict(args))
    curve = harness.quotient_curves(mesh, model, grid, threads=args.threads, quad=quad)
    report.curves = _curve_payload(curve)
    gates = harness.comparison_gates(model, float(grid[-1]), quad)
    report.extend(harness.gate_verdicts(
        gates, harness.verify_isoperimetric(curve) + [harness.volume_flux_tail(curve)]))
    report.extend(harness.verify_capacity_sandwich(
        mesh, model, rho, R, truncation=args.truncation, quad=quad))
    if args.surface:  # builtin surfaces are immersed in Euclidean 3-space
        report.extend(harness.verify_euclidean_sandwich(
            mesh, rho, R, truncation=args.truncation, quad=quad))
    report.extend(harness.exit_time_comparison(mesh, model, R, quad=quad))
    ends = harness.ends_bound(mesh, model, R0 if R0 > 0 else rho, t, curve=curve, quad=quad)
    report.extend(ends.checks)
    tone = harness.tone_report(mesh, model, R0 if R0 > 0 else rho, grid, quad=quad)
    report.extend(tone.checks)
    report.scalars = {
        "w_volume_estimate": curve.w_volume_estimate(),
        "w_flux_estimate": curve.w_flux_estimate(),
        "suprema_stable": curve.stable(),
        "ends": ends.to_dict(),
        "tone": tone.to_dict(),
    }
    _write_outputs(args, report, mesh, started)
    _print_checks(report)
    counts = report.counts()
    print(f"summary: {counts[PASS]} pass, {counts[FAIL]} fail, "
          f"{counts[INCONCLUSIVE]} inconclusive")
    return _exit_code(args, report)


def _config_dict(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items())
           if k not in ("config",) and not k.startswith("_")}
    for key, val in cfg.items():
        if isinstance(val, float) and math.isinf(val):
            cfg[key] = "inf"
    return cfg


_COMMANDS = {
    "model": _cmd_model,
    "surface": _cmd_surface,
    "quotients": _cmd_quotients,
    "capacity": _cmd_capacity,
    "exit-time": _cmd_exit_time,
    "ends": _cmd_ends,
    "tone": _cmd_tone,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _resolve(args)
        return _COMMANDS[args.command](args)
    except ExcompError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
