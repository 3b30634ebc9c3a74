"""Minimal surface equation on annular multigraphs, and sweep harnesses.

The Dirichlet solver works in covering polar coordinates ``(r, theta)`` with
``theta`` periodic of period ``2 pi n``.  The radial coordinate is mapped,
``r = r(q)`` with ``q`` uniform, and the equation is written in flux form

    d/dq (kr * u_q / W) + d/dtheta (kt * u_theta / W) = 0,
    kr = r / r',  kt = r' / r,  W = sqrt(1 + u_q^2 / r'^2 + u_theta^2 / r^2),

which is ``r r'`` times ``div(grad u / sqrt(1 + |grad u|^2))``.  Fluxes live on
cell faces, so the stencil is second order and conservative.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq, minimize
from scipy.sparse.linalg import spsolve

from .domains import ImplicitDomain, MedialAxisError, foot_points
from .fields import ScalarField, parse_field

__all__ = [
    "AnnularMultigraph",
    "MseSolution",
    "ComparisonResult",
    "MseError",
    "GridTooCoarseError",
    "GridMismatchError",
    "NewtonDivergenceError",
    "SamplingError",
    "solve_dirichlet",
    "comparison_check",
    "convergence_study",
    "boundary_data",
    "gradient_bound",
    "graph_mesh",
    "SurfaceFamily",
    "KontiReport",
    "kontinuitaetssatz_sweep",
    "half_catenoid_family",
    "half_catenoid_coverage",
    "bulging_disc_family",
    "ParametricSurface",
    "flat_disc",
    "catenoid_piece",
    "max_principle_distance",
]

MIN_GRID = (16, 64)
RESIDUAL_TOL = 1e-10


class MseError(ValueError):
    pass


class GridTooCoarseError(MseError):
    pass


class GridMismatchError(MseError):
    pass


class NewtonDivergenceError(MseError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class SamplingError(MseError):
    pass


# -- grids ------------------------------------------------------------------


@dataclass
class AnnularMultigraph:
    """Nodes of the ``sheets``-fold covering of ``r0 <= |p| <= r1``.

    ``values`` has shape ``(nr, nt)``; rows are radii, columns are angles.
    """

    sheets: int
    r0: float
    r1: float
    nr: int
    nt: int
    spacing: str = "log"
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.sheets < 1:
            raise MseError("sheets must be >= 1")
        if not (0 < self.r0 < self.r1) or not (math.isfinite(self.r0) and math.isfinite(self.r1)):
            raise MseError(f"need 0 < r0 < r1, got r0={self.r0}, r1={self.r1}")
        if self.spacing not in ("log", "uniform"):
            raise MseError(f"unknown radial spacing {self.spacing!r}")

    @property
    def shape(self):
        return (self.nr, self.nt)

    @property
    def q(self):
        if self.spacing == "log":
            return np.linspace(math.log(self.r0), math.log(self.r1), self.nr)
        return np.linspace(self.r0, self.r1, self.nr)

    @property
    def dq(self):
        q = self.q
        return q[1] - q[0]

    def radius(self, q):
        return np.exp(q) if self.spacing == "log" else np.asarray(q, dtype=float)

    def dradius(self, q):
        return np.exp(q) if self.spacing == "log" else np.ones_like(q)

    @property
    def r(self):
        return self.radius(self.q)

    @property
    def theta(self):
        return np.arange(self.nt) * self.dtheta

    @property
    def dtheta(self):
        return 2 * np.pi * self.sheets / self.nt

    def mesh(self):
        return np.meshgrid(self.r, self.theta, indexing="ij")

    def same_grid(self, other) -> bool:
        return (self.sheets, self.nr, self.nt, self.spacing) == (other.sheets, other.nr, other.nt, other.spacing) \
            and np.isclose(self.r0, other.r0) and np.isclose(self.r1, other.r1)

    def with_values(self, values):
        return AnnularMultigraph(self.sheets, self.r0, self.r1, self.nr, self.nt, self.spacing, np.asarray(values))


def boundary_data(spec, grid: AnnularMultigraph, radius: float):
    """Evaluate Dirichlet data on the circle of the given radius.

    ``spec`` is a number, a callable ``f(r, theta)`` or an expression in
    ``x1 = r`` and ``x2 = theta``.
    """
    th = grid.theta
    rr = np.full_like(th, radius)
    if isinstance(spec, (int, float, np.floating, np.integer)):
        vals = np.full_like(th, float(spec))
    elif isinstance(spec, str):
        try:
            vals = np.full_like(th, float(spec))
        except ValueError:
            f = parse_field(spec, 2)
            vals = f.value(np.stack([rr, th], axis=1))
    elif isinstance(spec, ScalarField):
        vals = spec.value(np.stack([rr, th], axis=1))
    elif callable(spec):
        vals = np.broadcast_to(np.asarray(spec(rr, th), dtype=float), th.shape).copy()
    else:
        raise MseError(f"cannot interpret boundary data {spec!r}")
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise MseError("boundary data must be finite")
    return vals


def _reference_values(v, grid: AnnularMultigraph):
    if isinstance(v, AnnularMultigraph):
        if not grid.same_grid(v) or v.values is None:
            raise GridMismatchError("reference multigraph lives on a different grid")
        return np.asarray(v.values, dtype=float)
    if isinstance(v, MseSolution):
        return _reference_values(v.graph, grid)
    if isinstance(v, np.ndarray):
        if v.shape != grid.shape:
            raise GridMismatchError(f"reference shape {v.shape} does not match grid {grid.shape}")
        return v.astype(float)
    R, T = grid.mesh()
    if isinstance(v, (int, float)):
        return np.full(grid.shape, float(v))
    if isinstance(v, str):
        f = parse_field(v, 2)
        return f.value(np.stack([R.ravel(), T.ravel()], axis=1)).reshape(grid.shape)
    return np.broadcast_to(np.asarray(v(R, T), dtype=float), grid.shape).copy()


# -- discrete operator ------------------------------------------------------


class _Operator:
    """Residual and Jacobian of the flux-form discretization."""

    def __init__(self, grid: AnnularMultigraph):
        self.grid = grid
        nr, nt = grid.shape
        q = grid.q
        self.dq, self.dt = grid.dq, grid.dtheta
        qf = 0.5 * (q[1:] + q[:-1])
        rf, rpf = grid.radius(qf), grid.dradius(qf)
        self.face_r = (rf / rpf, 1 / rpf**2, 1 / rf**2)  # kappa, alpha (for a), beta (for b)
        rn, rpn = grid.radius(q), grid.dradius(q)
        self.face_t = (rpn / rn, 1 / rn**2, 1 / rpn**2)
        idx = np.arange(nr * nt).reshape(nr, nt)
        self.idx = idx
        self.interior = idx[1:-1].ravel()

    def _fluxes(self, U):
        dq, dt = self.dq, self.dt
        Up, Um = np.roll(U, -1, axis=1), np.roll(U, 1, axis=1)
        # radial faces i+1/2, all j
        a = (U[1:] - U[:-1]) / dq
        ct = (Up - Um) / (2 * dt)
        b = 0.5 * (ct[1:] + ct[:-1])
        k, al, be = (c[:, None] for c in self.face_r)
        Wr = np.sqrt(1 + al * a * a + be * b * b)
        F = k * a / Wr
        # angular faces j+1/2, interior rows only
        c = (Up - U)[1:-1] / dt
        cq = (U[2:] - U[:-2]) / (2 * dq)
        d = 0.5 * (cq + np.roll(cq, -1, axis=1))
        k2, be2, al2 = (x[1:-1, None] for x in self.face_t)
        Wt = np.sqrt(1 + be2 * c * c + al2 * d * d)
        G = k2 * c / Wt
        return (a, b, Wr, F), (c, d, Wt, G)

    def residual(self, U):
        (_, _, _, F), (_, _, _, G) = self._fluxes(U)
        return (F[1:] - F[:-1]) / self.dq + (G - np.roll(G, 1, axis=1)) / self.dt

    def jacobian(self, U, full: bool = False):
        nr, nt = self.grid.shape
        dq, dt = self.dq, self.dt
        idx = self.idx
        jp, jm = np.roll(idx, -1, axis=1), np.roll(idx, 1, axis=1)
        (a, b, Wr, _), (c, d, Wt, _) = self._fluxes(U)
        k, al, be = (x[:, None] for x in self.face_r)
        Fa = k * (1 + be * b * b) / Wr**3
        Fb = -k * a * be * b / Wr**3
        k2, be2, al2 = (x[1:-1, None] for x in self.face_t)
        Gc = k2 * (1 + al2 * d * d) / Wt**3
        Gd = -k2 * c * al2 * d / Wt**3

        rows, cols, vals = [], [], []

        def add(r, cc, v):
            r, cc, v = np.broadcast_arrays(r, cc, v)
            rows.append(r.ravel())
            cols.append(cc.ravel())
            vals.append(v.ravel())

        # radial face flux F_{i+1/2} as a linear form in nodes
        terms_F = [
            (idx[1:], Fa / dq), (idx[:-1], -Fa / dq),
            (jp[1:], Fb / (4 * dt)), (jp[:-1], Fb / (4 * dt)),
            (jm[1:], -Fb / (4 * dt)), (jm[:-1], -Fb / (4 * dt)),
        ]
        # face f in 0..nr-2 enters row f with + and row f+1 with -
        for col, w in terms_F:
            add(idx[:-1], col, w / dq)
            add(idx[1:], col, -w / dq)
        # angular face G_{i, j+1/2} for interior i; contributes + at (i, j), - at (i, j+1)
        I = idx[1:-1]
        Ip, Im = jp[1:-1], jm[1:-1]
        terms_G = [
            (Ip, Gc / dt), (I, -Gc / dt),
            (idx[2:], Gd / (4 * dq)), (np.roll(idx[2:], -1, axis=1), Gd / (4 * dq)),
            (idx[:-2], -Gd / (4 * dq)), (np.roll(idx[:-2], -1, axis=1), -Gd / (4 * dq)),
        ]
        for col, w in terms_G:
            add(I, col, w / dt)
            add(Ip, col, -w / dt)
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        N = nr * nt
        J = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
        inn = self.interior
        return J[inn] if full else J[inn][:, inn]


# -- solver -----------------------------------------------------------------


@dataclass
class MseSolution:
    graph: AnnularMultigraph
    residual: float
    converged: bool
    log: list = field(default_factory=list)
    bounds: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    init: str = "harmonic"

    @property
    def u(self):
        return self.graph.values

    def to_dict(self):
        g = self.graph
        return {
            "sheets": g.sheets, "r0": g.r0, "r1": g.r1, "grid": [g.nr, g.nt], "spacing": g.spacing,
            "residual": self.residual, "converged": self.converged, "init": self.init,
            "newton": self.log, "bounds": self.bounds, "warnings": list(self.warnings),
            "u_min": float(np.min(g.values)), "u_max": float(np.max(g.values)),
        }

    def rows(self):
        """``(r, theta, u)`` rows, radius-major."""
        R, T = self.graph.mesh()
        return np.stack([R.ravel(), T.ravel(), self.graph.values.ravel()], axis=1)


def gradient_bound(values, grid: AnnularMultigraph):
    """Max over nodes of the discrete ``|grad v|`` (centered differences)."""
    V = np.asarray(values, dtype=float)
    r, rp = grid.r, grid.dradius(grid.q)
    vq = np.gradient(V, grid.dq, axis=0)
    vt = (np.roll(V, -1, axis=1) - np.roll(V, 1, axis=1)) / (2 * grid.dtheta)
    g = np.sqrt((vq / rp[:, None]) ** 2 + (vt / r[:, None]) ** 2)
    return float(g.max())


def solve_dirichlet(n: int, r0: float, r1: float, inner, outer, grid=(64, 256), damping: bool = True,
                    spacing: str = "log", init: str = "harmonic", max_iter: int = 50,
                    tol: float = RESIDUAL_TOL, reference=None, K: Optional[float] = None,
                    raise_on_failure: bool = True) -> MseSolution:
    """Solve the minimal surface equation on the ``n``-sheeted annulus.

    ``inner`` and ``outer`` give the data on the circles of radius ``r0`` and
    ``r1``.  Newton starts from the harmonic solution (or zero interior values
    when ``init="zero"``) and uses Armijo backtracking when ``damping`` is on.
    When ``reference`` and ``K`` are given, ``|grad reference| < K/2`` is
    checked and a warning is recorded if it fails.
    """
    nr, nt = (int(t) for t in grid)
    if nr < MIN_GRID[0] or nt < MIN_GRID[1]:
        raise GridTooCoarseError(f"grid {nr}x{nt} is below the minimum {MIN_GRID[0]}x{MIN_GRID[1]}")
    G = AnnularMultigraph(int(n), float(r0), float(r1), nr, nt, spacing)
    U = np.zeros(G.shape)
    U[0] = boundary_data(inner, G, G.r0)
    U[-1] = boundary_data(outer, G, G.r1)
    op = _Operator(G)
    inn = op.interior
    notes = []
    if reference is not None and K is not None:
        gb = gradient_bound(_reference_values(reference, G), G)
        if not gb < K / 2:
            msg = f"gradient bound fails: max |grad v| = {gb:.6g} >= K/2 = {K / 2:.6g}"
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)

    def resnorm(V):
        return float(np.max(np.abs(op.residual(V)))) if V.size else 0.0

    if init == "harmonic":
        # the Jacobian at a flat state is the discrete Laplacian; one exact step
        L = op.jacobian(np.zeros(G.shape), full=True).tocsc()
        bnd = np.setdiff1d(np.arange(U.size), inn)
        U.flat[inn] = spsolve(L[:, inn], -(L[:, bnd] @ U.flat[bnd]))
    elif init != "zero":
        raise MseError(f"unknown initialization {init!r}")

    log = []
    res = resnorm(U)
    log.append({"iter": 0, "residual": res, "step": 0.0})
    converged = res <= tol
    it = 0
    while not converged and it < max_iter:
        it += 1
        J = op.jacobian(U)
        delta = spsolve(J.tocsc(), -op.residual(U).ravel())
        if not np.all(np.isfinite(delta)):
            break
        s = 1.0
        while True:
            V = U.copy()
            V.flat[inn] += s * delta
            r_new = resnorm(V)
            if not damping or r_new <= (1 - 1e-4 * s) * res or s <= 2.0**-20:
                break
            s *= 0.5
        U, res = V, r_new
        log.append({"iter": it, "residual": res, "step": s})
        converged = res <= tol
        if not np.isfinite(res):
            break
    sol = MseSolution(G.with_values(U), res, bool(converged), log, warnings=notes, init=init)
    if not converged and raise_on_failure:
        raise NewtonDivergenceError(f"Newton did not converge: residual {res:.3e} after {it} iterations", sol)
    return sol


# -- comparison and convergence --------------------------------------------


@dataclass
class ComparisonResult:
    holds: bool
    lower_gap: float
    upper_gap: float
    witness: Optional[tuple] = None

    def __bool__(self):
        return self.holds

    def to_dict(self):
        return {"holds": self.holds, "lower_gap": self.lower_gap, "upper_gap": self.upper_gap,
                "witness": None if self.witness is None else list(self.witness)}


def comparison_check(solution, v, delta: float, tol: float = 1e-9) -> ComparisonResult:
    """Nodewise ``v - tol <= u <= v + delta + tol``; the witness is ``(i, j)``."""
    if isinstance(solution, MseSolution):
        graph = solution.graph
    else:
        graph = solution
    U = np.asarray(graph.values, dtype=float)
    V = _reference_values(v, graph)
    lo = U - V
    hi = V + delta - U
    lower, upper = float(lo.min()), float(hi.min())
    holds = lower >= -tol and upper >= -tol
    witness = None
    if not holds:
        worst = np.minimum(lo, hi)
        i, j = np.unravel_index(int(np.argmin(worst)), worst.shape)
        witness = (int(i), int(j))
    if isinstance(solution, MseSolution):
        solution.bounds = {"delta": delta, "lower_gap": lower, "upper_gap": upper}
    return ComparisonResult(holds, lower, upper, witness)


def convergence_study(v, delta: float, Rs: Sequence[float], r0: float, window, n: int = 1,
                      per_octave: int = 16, nt: int = 64, workers: int = 1) -> dict:
    """Sup over ``window`` of ``|u_R - v|`` for each outer radius ``R``.

    The inner data is ``v`` and the outer data is ``v + delta``.  Radial
    nodes are log-spaced with ``per_octave`` cells per doubling of radius.
    """
    Rs = [float(R) for R in Rs]
    w0, w1 = (float(t) for t in window)
    if any(b <= a for a, b in zip(Rs, Rs[1:])):
        raise MseError("R list must be increasing")
    if not (r0 <= w0 < w1) or any(R <= w1 for R in Rs):
        raise MseError("need r0 <= window start < window end < every R")
    vf = _as_callable(v)

    def one(R):
        nr = max(MIN_GRID[0], int(round(per_octave * math.log2(R / r0))) + 1)
        sol = solve_dirichlet(n, r0, R, lambda r, t: vf(r, t), lambda r, t: vf(r, t) + delta,
                              grid=(nr, nt))
        Rg, Tg = sol.graph.mesh()
        mask = (Rg >= w0 * (1 - 1e-12)) & (Rg <= w1 * (1 + 1e-12))
        err = np.abs(sol.u - vf(Rg, Tg))
        return float(err[mask].max()), sol.residual, nr

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            out = list(ex.map(_convergence_job, [(v, delta, r0, R, w0, w1, n, per_octave, nt) for R in Rs]))
    else:
        out = [one(R) for R in Rs]
    sups = [o[0] for o in out]
    return {
        "R": Rs, "r0": r0, "window": [w0, w1], "delta": delta,
        "sup_errors": sups, "residuals": [o[1] for o in out], "radial_nodes": [o[2] for o in out],
        "strictly_decreasing": all(b < a for a, b in zip(sups, sups[1:])),
    }


def _convergence_job(args):
    v, delta, r0, R, w0, w1, n, per_octave, nt = args
    rep = convergence_study(v, delta, [R], r0, (w0, w1), n, per_octave, nt)
    return rep["sup_errors"][0], rep["residuals"][0], rep["radial_nodes"][0]


def _as_callable(v):
    if isinstance(v, (int, float)):
        return lambda r, t: np.full(np.broadcast(r, t).shape, float(v))
    if isinstance(v, str):
        f = parse_field(v, 2)

        def ev(r, t):
            r, t = np.broadcast_arrays(np.asarray(r, float), np.asarray(t, float))
            return f.value(np.stack([r.ravel(), t.ravel()], axis=1)).reshape(r.shape)

        return ev
    return v


def graph_mesh(solution: MseSolution):
    """Triangle mesh of ``(r cos t, r sin t, u)`` over the covering grid."""
    g = solution.graph
    R, T = g.mesh()
    V = np.stack([R * np.cos(T), R * np.sin(T), g.values], axis=-1).reshape(-1, 3)
    idx = np.arange(g.nr * g.nt).reshape(g.nr, g.nt)
    a, b = idx[:-1], np.roll(idx, -1, axis=1)[:-1]
    c, d = idx[1:], np.roll(idx, -1, axis=1)[1:]
    F = np.concatenate([np.stack([a, b, d], -1).reshape(-1, 3), np.stack([a, d, c], -1).reshape(-1, 3)])
    return V, F


# -- continuity-principle sweep --------------------------------------------


@dataclass
class SurfaceFamily:
    """``sample(t) -> (interior points, boundary points)`` for each parameter."""

    sample: Callable
    ts: np.ndarray
    name: str = "family"
    meta: dict = field(default_factory=dict)


@dataclass
class KontiReport:
    passed: bool
    bound: float
    sups: list
    ts: list
    first_violation: Optional[dict] = None
    coverage: Optional[dict] = None
    family: str = ""

    def to_dict(self):
        return {"family": self.family, "passed": self.passed, "bound": self.bound, "t": self.ts,
                "sup_rho": self.sups, "first_violation": self.first_violation, "coverage": self.coverage}


def kontinuitaetssatz_sweep(D: ImplicitDomain, rho: ScalarField, family: SurfaceFamily,
                            tol: float = 1e-9) -> KontiReport:
    """Track ``sup rho`` along a family of sampled surfaces.

    The bound is the max of ``rho`` over the first surface and all boundary
    samples.  The sweep passes when every surface stays inside ``D`` and below
    the bound plus ``tol``; otherwise the first violating ``(t, point)`` is
    returned.
    """
    ts = np.asarray(family.ts, dtype=float)
    samples = []
    for t in ts:
        try:
            P, B = family.sample(float(t))
        except (FloatingPointError, ValueError) as exc:
            raise SamplingError(f"family {family.name} failed at t={t}: {exc}") from exc
        P, B = np.atleast_2d(P), np.atleast_2d(B)
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(B))):
            raise SamplingError(f"family {family.name} produced non-finite samples at t={t}")
        samples.append((P, B))
    B_all = np.vstack([B for _, B in samples])
    if not np.all(D.contains(B_all)):
        raise SamplingError("boundary samples leave the domain")
    bound = float(max(np.max(_rho_inside(D, rho, samples[0][0])), np.max(rho.value(B_all))))
    sups, first = [], None
    for t, (P, _) in zip(ts, samples):
        vals = _rho_inside(D, rho, P)
        k = int(np.argmax(vals))
        sups.append(float(vals[k]))
        if first is None and vals[k] > bound + tol:
            first = {"t": float(t), "point": P[k].tolist(), "rho": float(vals[k]),
                     "inside": bool(np.isfinite(vals[k]))}
    return KontiReport(first is None, bound, sups, ts.tolist(), first, family=family.name)


def _rho_inside(D, rho, P):
    """``rho`` on samples, with ``+inf`` for samples outside ``D``."""
    inside = D.contains(P)
    out = np.full(len(P), np.inf)
    if np.any(inside):
        out[inside] = rho.value(P[inside])
    return out


def _logcosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2 * x)) - math.log(2.0)


TAU_MAX = math.acosh(math.sqrt(2.0))


def half_catenoid_family(tau: float = 0.8, a_min: float = 1e-4, count: int = 60, nz: int = 48,
                         nphi: int = 48, r_cap: float = 1e3) -> SurfaceFamily:
    """Lowered vertical half-catenoids cut at ``z = 0``.

    The member for ``a`` is ``{x^2 + y^2 = a^2 cosh^2((z - tau)/a), 0 <= z <= tau}``,
    truncated at radius ``r_cap`` (the cut circle joins the boundary).  The
    parameter ``t`` runs from 0 (``a = 1``) to 1 (``a = a_min``) in log scale.
    """
    if not 0 < tau <= TAU_MAX:
        raise MseError(f"tau must lie in (0, arccosh(sqrt 2)] = (0, {TAU_MAX:.6f}]")
    la = math.log(a_min)
    phi = np.linspace(0, 2 * np.pi, nphi, endpoint=False)

    def a_of(t):
        return math.exp(t * la)

    def sample(t):
        a = a_of(t)
        # lowest height kept before the radius cap is hit
        s_cap = a * math.acosh(r_cap / a) if r_cap / a > 1 else 0.0
        z_lo = max(0.0, tau - s_cap)
        z = np.linspace(z_lo, tau, nz)
        r = a * np.cosh((z - tau) / a)
        Z, Ph = np.meshgrid(z, phi, indexing="ij")
        Rr = np.broadcast_to(r[:, None], Z.shape)
        P = np.stack([Rr * np.cos(Ph), Rr * np.sin(Ph), Z], -1).reshape(-1, 3)
        B = np.concatenate([
            np.stack([r[0] * np.cos(phi), r[0] * np.sin(phi), np.full_like(phi, z[0])], 1),
            np.stack([r[-1] * np.cos(phi), r[-1] * np.sin(phi), np.full_like(phi, z[-1])], 1),
        ])
        return P, B

    ts = np.linspace(0.0, 1.0, count)
    return SurfaceFamily(sample, ts, "halfcatenoid", {"tau": tau, "a_min": a_min, "a_of": a_of})


def half_catenoid_coverage(tau: float = 0.8, a_min: float = 1e-4, r_max: float = 10.0, points: int = 10_000,
                           tol: float = 1e-9) -> dict:
    """Check that ``{r >= sqrt 2, 0 <= z < tau}`` (up to ``r_max``) is swept.

    A stratified grid of points is used.  For each point the family parameter
    ``a`` is found by root finding in ``log a`` and must lie in ``[a_min, 1]``;
    the point must then satisfy the member's equation to ``tol`` (relative).
    """
    side = int(math.ceil(math.sqrt(points)))
    nr = side
    nz = int(math.ceil(points / nr))
    rs = math.sqrt(2.0) + (r_max - math.sqrt(2.0)) * np.arange(nr) / (nr - 1)
    zs = tau * (np.arange(nz) + 0.5) / nz
    Rg, Zg = (x.ravel()[:points] for x in np.meshgrid(rs, zs, indexing="ij"))
    la_min = math.log(a_min)
    found = np.full(len(Rg), np.nan)
    uncovered = []
    for k, (r, z) in enumerate(zip(Rg, Zg)):
        s = tau - z
        g = lambda la: la + _logcosh(s / math.exp(la)) - math.log(r)  # noqa: E731
        g0, g1 = g(la_min), g(0.0)
        if g1 > tol or g0 < 0:
            uncovered.append(k)
            continue
        if abs(g1) <= tol:
            found[k] = 0.0
            continue
        found[k] = brentq(g, la_min, 0.0, xtol=1e-14, rtol=1e-15)
    a = np.exp(found)
    ok = np.isfinite(a)
    resid = np.full(len(Rg), np.inf)
    resid[ok] = np.abs(np.log(a[ok]) + _logcosh((tau - Zg[ok]) / a[ok]) - np.log(Rg[ok]))
    covered = ok & (resid <= tol)
    return {
        "points": int(len(Rg)), "covered": int(covered.sum()), "all_covered": bool(covered.all()),
        "a_range": [float(np.nanmin(a)), float(np.nanmax(a))] if ok.any() else None,
        "max_residual": float(resid[ok].max()) if ok.any() else None,
        "uncovered": [[float(Rg[k]), float(Zg[k])] for k in np.flatnonzero(~covered)[:10]],
        "tau": tau, "a_min": a_min, "r_max": r_max,
    }


def bulging_disc_family(radius: float = 0.5, height: float = 0.0, t_flat: float = 0.5, rate: float = 2.0,
                        count: int = 41, nrad: int = 24, nphi: int = 32) -> SurfaceFamily:
    """Discs with a fixed boundary circle that stay flat until ``t_flat`` and
    then bulge upward as spherical caps of apex height ``rate * (t - t_flat)``.

    These are not minimal; the family is a counterexample for the sweep.
    """
    phi = np.linspace(0, 2 * np.pi, nphi, endpoint=False)
    rr = np.linspace(0, radius, nrad)

    def bump(t):
        return max(0.0, rate * (t - t_flat))

    def sample(t):
        h = bump(t)
        R, Ph = np.meshgrid(rr, phi, indexing="ij")
        if h > 0:
            rs = (radius**2 + h * h) / (2 * h)
            Z = height + np.sqrt(np.maximum(rs * rs - R * R, 0.0)) - (rs - h)
        else:
            Z = np.full_like(R, height)
        P = np.stack([R * np.cos(Ph), R * np.sin(Ph), Z], -1).reshape(-1, 3)
        B = np.stack([radius * np.cos(phi), radius * np.sin(phi), np.full_like(phi, height)], 1)
        return P, B

    ts = np.linspace(0.0, 1.0, count)
    return SurfaceFamily(sample, ts, "bulging-disc", {"t_flat": t_flat, "rate": rate, "bump": bump})


# -- distance to the boundary -----------------------------------------------


@dataclass
class ParametricSurface:
    """``X(u, v)`` on a rectangle; the boundary is ``v = v_range`` ends
    (and ``u`` ends unless ``periodic_u``)."""

    fn: Callable
    u_range: tuple
    v_range: tuple
    periodic_u: bool = False
    name: str = "surface"

    def points(self, U, V):
        return np.asarray(self.fn(np.asarray(U, float), np.asarray(V, float)), dtype=float)

    def grid(self, nu=64, nv=64):
        us = np.linspace(*self.u_range, nu, endpoint=not self.periodic_u)
        vs = np.linspace(*self.v_range, nv)
        U, V = np.meshgrid(us, vs, indexing="ij")
        return U.ravel(), V.ravel()

    def boundary_params(self, count=256):
        u0, u1 = self.u_range
        v0, v1 = self.v_range
        us = np.linspace(u0, u1, count, endpoint=not self.periodic_u)
        vs = np.linspace(v0, v1, count)
        U = [us, us]
        V = [np.full(count, v0), np.full(count, v1)]
        if not self.periodic_u:
            U += [np.full(count, u0), np.full(count, u1)]
            V += [vs, vs]
        return np.concatenate(U), np.concatenate(V)

    def is_planar(self, tol=1e-9):
        U, V = self.grid(16, 16)
        P = self.points(U, V)
        C = P - P.mean(0)
        s = np.linalg.svd(C, compute_uv=False)
        return bool(s[-1] <= tol * max(1.0, s[0])), C


def flat_disc(radius=0.5, center=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0)) -> ParametricSurface:
    """Flat disc in polar parameters; ``v`` is the radius, the ``v = 0`` end is
    the center (a degenerate edge, not boundary)."""
    from .domains import tangent_basis

    c = np.asarray(center, float)
    e1, e2 = tangent_basis(np.asarray(normal, float) / np.linalg.norm(normal))

    def fn(u, v):
        return c + (v * np.cos(u))[..., None] * e1 + (v * np.sin(u))[..., None] * e2

    return _DiscSurface(fn, (0.0, 2 * np.pi), (0.0, radius), True, "flat-disc")


class _DiscSurface(ParametricSurface):
    def boundary_params(self, count=256):
        us = np.linspace(0, 2 * np.pi, count, endpoint=False)
        return us, np.full(count, self.v_range[1])


def catenoid_piece(scale=1.1, height=1.0) -> ParametricSurface:
    """``scale * (cosh(v/scale) cos u, cosh(v/scale) sin u, v/scale)``, ``|v| <= height``."""

    def fn(u, v):
        w = v / scale
        return scale * np.stack([np.cosh(w) * np.cos(u), np.cosh(w) * np.sin(u), w], -1)

    return ParametricSurface(fn, (0.0, 2 * np.pi), (-height, height), True, f"catenoid-piece:{scale}")


def _dist_to_boundary(D, X):
    # only the distance matters here, so equidistant feet are acceptable
    Y, _, _ = foot_points(D, X, ambiguity=0.0)
    return np.linalg.norm(X - Y, axis=1)


def _refine(D, S: ParametricSurface, u, v, boundary: bool):
    """Minimize the boundary distance locally in parameters (or along the
    boundary curve when ``boundary``)."""
    (u0, u1), (v0, v1) = S.u_range, S.v_range

    def dist(p):
        uu, vv = p if not boundary else (p[0], v_fixed)
        if not S.periodic_u:
            uu = min(max(uu, u0), u1)
        vv = min(max(vv, v0), v1)
        X = S.points(np.array([uu]), np.array([vv]))
        try:
            return float(_dist_to_boundary(D, X)[0])
        except MedialAxisError:
            return np.inf

    if boundary:
        v_fixed = v
        res = minimize(dist, [u], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400})
        return float(res.fun), (float(res.x[0]), float(v))
    res = minimize(dist, [u, v], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 800})
    uu, vv = res.x
    return float(res.fun), (float(uu), float(min(max(vv, v0), v1)))


def max_principle_distance(D: ImplicitDomain, S: ParametricSurface, nu: int = 64, nv: int = 64,
                           boundary_count: int = 256, refine: int = 3, flat_tol: float = 1e-7) -> dict:
    """Compare ``dist(M, bD)`` with ``dist(bM, bD)`` for a sampled surface.

    Both are computed on samples and then refined by local minimization
    around the best few samples.  When the interior attains the distance and
    ``M`` is planar with a parallel piece of ``bD`` at that distance, the
    report flags the flat equality case.
    """
    U, V = S.grid(nu, nv)
    X = S.points(U, V)
    if not np.all(D.contains(X)):
        raise SamplingError("surface leaves the domain")
    d = _dist_to_boundary(D, X)
    ub, vb = S.boundary_params(boundary_count)
    Xb = S.points(ub, vb)
    db = _dist_to_boundary(D, Xb)

    best_m = float(d.min())
    for k in np.argsort(d)[:refine]:
        val, _ = _refine(D, S, U[k], V[k], boundary=False)
        best_m = min(best_m, val)
    best_b = float(db.min())
    for k in np.argsort(db)[:refine]:
        val, _ = _refine(D, S, ub[k], vb[k], boundary=True)
        best_b = min(best_b, val)
    best_m = min(best_m, best_b)
    gap = best_b - best_m

    # interior attainment: samples away from the boundary curve at the minimum
    bnd_tree_d = _param_boundary_distance(S, U, V)
    interior = bnd_tree_d > 0.1 * min(np.ptp(S.u_range), np.ptp(S.v_range))
    attained_inside = bool(np.any(interior & (d <= best_m + flat_tol)))
    planar, _ = S.is_planar()
    equality = False
    if attained_inside and planar:
        Y, _, _ = foot_points(D, X[interior], ambiguity=0.0)
        Cy = Y - Y.mean(0)
        sy = np.linalg.svd(Cy, compute_uv=False)
        equality = bool(sy[-1] <= flat_tol * max(1.0, sy[0]) and np.ptp(d[interior]) <= flat_tol)
    return {
        "surface": S.name, "domain": D.name,
        "dist_M": best_m, "dist_bM": best_b, "gap": gap,
        "interior_attains": attained_inside, "planar": planar, "flat_equality_case": equality,
        "samples": int(len(X)), "boundary_samples": int(len(Xb)),
    }


def _param_boundary_distance(S, U, V):
    (u0, u1), (v0, v1) = S.u_range, S.v_range
    if isinstance(S, _DiscSurface):
        return v1 - V
    dv = np.minimum(V - v0, v1 - V)
    if S.periodic_u:
        return dv
    return np.minimum(dv, np.minimum(U - u0, u1 - U))
