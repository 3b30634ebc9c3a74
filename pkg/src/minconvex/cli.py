"""Command-line frontend: ``minconvex <subcommand> ...``.

Every run prints a JSON report with the tool version, the resolved
configuration, a tag naming the check and (unless ``--reproducible``) the wall
time.  Exit codes: 0 computed (whatever the verdict), 1 usage or input error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__

WORKERS_ENV = "MINCONVEX_WORKERS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- small parsers ------------------------------------------------------------


def _floats(text, count=None, name="value"):
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"{name}: expected {count} numbers, got {len(vals)}")
    return vals


def _complexes(text, name="query"):
    try:
        return [complex(t.replace(" ", "").replace("i", "j")) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated complex numbers, got {text!r}") from None


def _grid(text):
    try:
        a, b = str(text).lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise UsageError(f"grid must look like 64x256, got {text!r}") from None


def _read_json(path):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def load_point_set(path, kind="minimal"):
    """Point cloud from ``{"dim": n, "points": [[...], ...]}``.

    For null hulls each coordinate may be a ``[re, im]`` pair.
    """
    doc = _read_json(path)
    if not isinstance(doc, dict) or "dim" not in doc or "points" not in doc:
        raise UsageError(f"{path}: point set needs 'dim' and 'points'")
    n = doc["dim"]
    pts = doc["points"]
    if not isinstance(n, int) or n < 1 or not isinstance(pts, list) or not pts:
        raise UsageError(f"{path}: 'dim' must be a positive integer and 'points' a nonempty list")
    try:
        arr = np.asarray(pts, dtype=float)
    except (TypeError, ValueError):
        raise UsageError(f"{path}: points must be numeric") from None
    if arr.ndim == 3 and arr.shape[2] == 2:
        arr = arr[..., 0] + 1j * arr[..., 1]
        if kind != "null":
            raise UsageError(f"{path}: complex points are only valid for null hulls")
    if arr.ndim != 2 or arr.shape[1] != n:
        raise UsageError(f"{path}: every point must have {n} coordinates")
    if kind == "null" and not np.iscomplexobj(arr):
        arr = arr.astype(complex)
    return arr


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in r])


# -- subcommands --------------------------------------------------------------


def cmd_check_psh(args):
    from .fields import load_field
    from .psh import check_null_psh, check_p_psh, parse_region

    f = load_field(args.field, args.dim)
    region = parse_region(args.region, f.dim)
    if args.null:
        v = check_null_psh(f, region, args.mode, args.tol, args.samples, args.seed)
        tag = "null-psh"
    else:
        if args.p is None:
            raise UsageError("give --p or --null")
        v = check_p_psh(f, region, args.p, args.mode, args.tol, args.samples, args.seed)
        tag = "p-psh"
    return tag, v.to_dict()


def cmd_check_domain(args):
    from .domains import boundary_mesh, check_p_convex_boundary, parse_domain, write_obj

    D = parse_domain(args.domain)
    v = check_p_convex_boundary(D, args.p, args.mode, args.samples, args.tol, args.seed)
    out = v.to_dict()
    out["domain"] = D.name
    if args.emit_obj:
        V, F = boundary_mesh(D)
        write_obj(args.emit_obj, V, F)
        out["obj"] = {"path": args.emit_obj, "vertices": len(V), "faces": len(F)}
    return "p-convex-boundary", out


def cmd_mdisc(args):
    from .discs import disc_mesh, m_disc, sigma_surface
    from .domains import write_obj
    from .fields import load_field

    rho = load_field(args.field, 3)
    x = np.array(_floats(args.point, 3, "--point"))
    disc = m_disc(rho, x, args.radius, args.branch, args.steps, args.rays)
    out = {"point": x, "branch": args.branch, "radius": args.radius, "diagnostics": disc.diagnostics}
    if args.out:
        S = sigma_surface(rho, x)
        Z, W, TH = disc.zetas.ravel(), disc.W.reshape(-1, 3), disc.theta.reshape(-1, 3)
        A = W.real
        vals = rho.value(x + A)
        quad = np.abs(S.defining(W))
        null = np.abs(np.sum(TH * TH, axis=-1)) / np.sum(np.abs(TH) ** 2, axis=-1)
        tang = np.abs(np.einsum("ki,ki->k", TH, S.a + 2 * (W @ S.c)))
        rows = [(z.real, z.imag, a[0], a[1], a[2], r, q, nu, t) for z, a, r, q, nu, t in zip(Z, A, vals, quad, null, tang)]
        _write_csv(args.out, ["zeta_re", "zeta_im", "alpha1", "alpha2", "alpha3", "rho",
                              "quadric_residual", "nullity_residual", "tangency_residual"], rows)
        out["csv"] = {"path": args.out, "rows": len(rows)}
    if args.emit_obj:
        V, F = disc_mesh(disc)
        write_obj(args.emit_obj, V, F)
        out["obj"] = {"path": args.emit_obj, "vertices": len(V), "faces": len(F)}
    return "m-disc-growth", out


def cmd_hull(args):
    from .hulls import hull_sweep, minimal_hull_membership, null_hull_membership

    K = load_point_set(args.set, args.kind)
    common = dict(budget=args.budget, degree=args.degree, starts=args.starts, eps=args.eps, tol=args.tol,
                  seed=args.seed, lp_prefilter=not args.no_lp)
    if args.sweep:
        if args.kind != "minimal":
            raise UsageError("--sweep is available for minimal hulls")
        rows = hull_sweep(K, args.plane, args.extent, args.offset, args.sweep, budget=args.budget,
                          degree=args.degree, starts=args.starts, seed=args.seed)
        counts = {}
        for r in rows:
            counts[r[3]] = counts.get(r[3], 0) + 1
        out = {"sweep": {"plane": args.plane, "grid": args.sweep, "extent": args.extent, "counts": counts}}
        if args.out:
            _write_csv(args.out, ["x", "y", "z", "status"], rows)
            out["csv"] = {"path": args.out, "rows": len(rows)}
        return "hull-sweep", out
    if args.query is None:
        raise UsageError("--query is required unless --sweep is given")
    if args.kind == "minimal":
        x = np.array(_floats(args.query, K.shape[1], "--query"))
        v = minimal_hull_membership(K, x, **common)
    else:
        z = np.array(_complexes(args.query))
        if len(z) != K.shape[1]:
            raise UsageError(f"--query: expected {K.shape[1]} coordinates")
        v = null_hull_membership(K, z, **common)
    return f"{args.kind}-hull", v.to_dict()


def cmd_tau(args):
    from .morse import tau_function, validate_tau

    a = _floats(args.a, 3, "--a")
    tau = tau_function(a, c0=args.c0, mu=args.mu)
    rep = validate_tau(tau, p_samples=args.p_samples, band_samples=args.validate, seed=args.seed)
    out = {"tau": rep}
    if args.out:
        parts = [p for p in args.out.split(",") if p]
        csv_path = next((p for p in parts if p.endswith(".csv")), None)
        json_path = next((p for p in parts if p.endswith(".json")), None)
        if csv_path:
            t = np.linspace(0.0, 1.5 * args.c0, 601)
            h, dh, d2h = tau.h.derivatives(t)
            _write_csv(csv_path, ["t", "h", "dh", "d2h"], zip(t, h, dh, d2h))
            out["csv"] = {"path": csv_path, "rows": len(t)}
        if json_path:
            out["report_path"] = json_path
            Path(json_path).write_text(json.dumps(_jsonable(rep), indent=2, sort_keys=True) + "\n")
    return "tau-certification", out


def _mse_data(text):
    try:
        return float(text)
    except ValueError:
        return text


def cmd_mse(args):
    from .mse import comparison_check, convergence_study, graph_mesh, solve_dirichlet

    if args.action == "sweep":
        if args.R is None:
            raise UsageError("mse sweep needs --R")
        Rs = _floats(args.R, name="--R")
        window = _floats(args.window, 2, "--window")
        rep = convergence_study(_mse_data(args.v), args.delta, Rs, args.r0, window, args.sheets,
                                args.per_octave, args.nt, workers=args.workers)
        return "mse-convergence", rep
    if args.r1 is None:
        raise UsageError("mse needs --r1")
    if not args.r0 < args.r1:
        raise UsageError(f"need r0 < r1, got r0={args.r0}, r1={args.r1}")
    grid = _grid(args.grid)
    sol = solve_dirichlet(args.sheets, args.r0, args.r1, _mse_data(args.inner), _mse_data(args.outer), grid,
                          spacing=args.spacing, init=args.init)
    out = sol.to_dict()
    if args.reference is not None:
        out["comparison"] = comparison_check(sol, _mse_data(args.reference), args.delta).to_dict()
    if args.out:
        _write_csv(args.out, ["r", "theta", "u"], sol.rows())
        out["csv"] = {"path": args.out, "rows": int(sol.u.size)}
    if args.emit_obj:
        from .domains import write_obj

        V, F = graph_mesh(sol)
        write_obj(args.emit_obj, V, F)
        out["obj"] = {"path": args.emit_obj, "vertices": len(V), "faces": len(F)}
    return "mse-dirichlet", out


def cmd_konti(args):
    from .domains import parse_domain
    from .fields import load_field
    from .mse import bulging_disc_family, half_catenoid_coverage, half_catenoid_family, kontinuitaetssatz_sweep

    D = parse_domain(args.domain)
    rho = load_field(args.rho, D.dim)
    kind, _, rest = args.family.partition(":")
    coverage = None
    if kind == "halfcatenoid":
        tau = float(rest) if rest else 0.8
        fam = half_catenoid_family(tau, args.a_min, args.count)
        if args.coverage:
            coverage = half_catenoid_coverage(tau, args.a_min, points=args.coverage)
    elif kind == "bulge":
        vals = _floats(rest, 2, "--family bulge") if rest else [0.5, 2.0]
        fam = bulging_disc_family(t_flat=vals[0], rate=vals[1], count=args.count)
    else:
        raise UsageError(f"unknown family {args.family!r} (use halfcatenoid:tau or bulge:t,rate)")
    rep = kontinuitaetssatz_sweep(D, rho, fam, args.tol)
    rep.coverage = coverage
    out = rep.to_dict()
    if coverage is not None:
        out["passed_with_coverage"] = bool(rep.passed and coverage["all_covered"])
    return "kontinuitaetssatz-sweep", out


def cmd_maxdist(args):
    from .domains import parse_domain
    from .mse import catenoid_piece, flat_disc, max_principle_distance

    D = parse_domain(args.domain)
    kind, _, rest = args.surface.partition(":")
    if kind == "disc":
        vals = _floats(rest, None, "--surface disc") if rest else [0.5]
        r, c = vals[0], (vals[1:4] if len(vals) >= 4 else [0.0, 0.0, 0.0])
        S = flat_disc(r, c)
    elif kind == "catenoid":
        vals = _floats(rest, 2, "--surface catenoid") if rest else [1.1, 1.0]
        S = catenoid_piece(*vals)
    else:
        raise UsageError(f"unknown surface {args.surface!r} (use disc:r[,cx,cy,cz] or catenoid:scale,height)")
    return "max-principle-distance", max_principle_distance(D, S)


# -- parser -------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="minconvex", description="Numerical checks for minimally convex domains and minimal hulls.")
    p.add_argument("--version", action="version", version=f"minconvex {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--report", help="also write the JSON report here")
        sp.add_argument("--reproducible", action="store_true", help="omit the wall time from the report")
        sp.add_argument("--workers", type=int, default=default_workers(),
                        help=f"worker count (default from ${WORKERS_ENV})")
        return sp

    s = common(sub.add_parser("check-psh", help="p-plurisubharmonicity of a field on a region"))
    s.add_argument("--field", required=True)
    s.add_argument("--dim", type=int, default=3)
    s.add_argument("--p", type=int)
    s.add_argument("--null", action="store_true", help="test null plurisubharmonicity (n = 3)")
    s.add_argument("--mode", choices=["weak", "strong"], default="weak")
    s.add_argument("--region", default="box:-1,1")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_check_psh)

    s = common(sub.add_parser("check-domain", help="p-convexity of a domain boundary"))
    s.add_argument("--domain", required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--mode", choices=["weak", "strong"], default="weak")
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--emit-obj")
    s.set_defaults(func=cmd_check_domain)

    s = common(sub.add_parser("mdisc", help="null disc with quadratic growth of a field"))
    s.add_argument("--field", required=True)
    s.add_argument("--point", required=True)
    s.add_argument("--branch", type=int, choices=[1, 2], default=1)
    s.add_argument("--radius", type=float, default=0.1)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--rays", type=int, default=32)
    s.add_argument("--out")
    s.add_argument("--emit-obj")
    s.set_defaults(func=cmd_mdisc)

    s = common(sub.add_parser("hull", help="minimal or null hull membership"))
    s.add_argument("--kind", choices=["minimal", "null"], default="minimal")
    s.add_argument("--set", required=True)
    s.add_argument("--query")
    s.add_argument("--degree", type=int, default=4)
    s.add_argument("--budget", type=int, default=10_000)
    s.add_argument("--starts", type=int, default=16)
    s.add_argument("--tol", type=float)
    s.add_argument("--eps", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-lp", action="store_true", help="skip the convex hull prefilter")
    s.add_argument("--sweep", type=int, metavar="GRID", help="rasterize verdicts on a GRID x GRID slice")
    s.add_argument("--plane", choices=["xy", "xz", "yz"], default="xz")
    s.add_argument("--extent", type=float, default=1.5)
    s.add_argument("--offset", type=float, default=0.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_hull)

    s = common(sub.add_parser("tau", help="build and certify the normal-form function tau"))
    s.add_argument("--a", required=True)
    s.add_argument("--c0", type=float, default=0.1)
    s.add_argument("--mu", type=float)
    s.add_argument("--validate", type=int, default=100_000, metavar="N", help="band samples")
    s.add_argument("--p-samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="comma-separated h.csv and report.json paths")
    s.set_defaults(func=cmd_tau)

    s = common(sub.add_parser("mse", help="minimal surface equation on annular multigraphs"))
    s.add_argument("action", nargs="?", choices=["solve", "sweep"], default="solve")
    s.add_argument("--sheets", type=int, default=1)
    s.add_argument("--r0", type=float, required=True)
    s.add_argument("--r1", type=float)
    s.add_argument("--inner", default="0")
    s.add_argument("--outer", default="0")
    s.add_argument("--grid", default="64x256")
    s.add_argument("--spacing", choices=["log", "uniform"], default="log")
    s.add_argument("--init", choices=["harmonic", "zero"], default="harmonic")
    s.add_argument("--reference", help="reference multigraph v for the comparison check")
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--R", help="outer radii for mse sweep")
    s.add_argument("--v", default="0", help="reference solution for mse sweep")
    s.add_argument("--window", default="2,4")
    s.add_argument("--per-octave", type=int, default=16)
    s.add_argument("--nt", type=int, default=64)
    s.add_argument("--out")
    s.add_argument("--emit-obj")
    s.set_defaults(func=cmd_mse)

    s = common(sub.add_parser("konti", help="continuity-principle sweep of a surface family"))
    s.add_argument("--domain", default="slab:-1,1")
    s.add_argument("--rho", default="-log(1-x3)-log(1+x3)")
    s.add_argument("--family", default="halfcatenoid:0.8")
    s.add_argument("--count", type=int, default=60)
    s.add_argument("--a-min", type=float, default=1e-4)
    s.add_argument("--coverage", type=int, default=10_000, help="coverage sample points (0 to skip)")
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_konti)

    s = common(sub.add_parser("maxdist", help="boundary distance of a surface versus its boundary curve"))
    s.add_argument("--domain", required=True)
    s.add_argument("--surface", default="disc:0.5")
    s.set_defaults(func=cmd_maxdist)
    return p


def _numerical_errors():
    from .discs import BranchCollisionError, CriticalPointError, ResidualError
    from .domains import DegenerateGradientError, MedialAxisError
    from .jet import FieldDomainError
    from .morse import ProfileConstructionError, ValidationError
    from .mse import NewtonDivergenceError, SamplingError
    from .psh import SampleEvaluationError

    return (FieldDomainError, NewtonDivergenceError, SamplingError, ResidualError, BranchCollisionError,
            CriticalPointError, MedialAxisError, DegenerateGradientError, ProfileConstructionError,
            ValidationError, SampleEvaluationError, np.linalg.LinAlgError, FloatingPointError)


def dispatch(argv=None, stdout=None, stderr=None) -> int:
    """Run one subcommand; returns the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_usage(stderr)
        return 1
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "reproducible", "report")}
    start = time.perf_counter()
    try:
        tag, result = args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return 1
    except _numerical_errors() as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"input error: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    report = {"tool": "minconvex", "version": __version__, "command": args.command, "check": tag,
              "config": config, "result": result}
    if not args.reproducible:
        report["wall_time"] = time.perf_counter() - start
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    print(text, file=stdout)
    if args.report:
        Path(args.report).write_text(text + "\n")
    return 0


def main():  # pragma: no cover - console entry point
    sys.exit(dispatch())


if __name__ == "__main__":  # pragma: no cover
    main()
