"""Minimal and null hull membership for finite point clouds.

A point is tested three ways, cheapest first:

* separation from the convex hull by a linear program,
* a search for a disc centered at the point whose boundary stays near ``K``
  (INSIDE when the boundary penalty functional is small),
* a search for a separating quadratic in the relevant plurisubharmonic class
  (OUTSIDE when one is found and re-verified).

Anything else is reported as UNKNOWN together with the best bounds found.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import cKDTree

from .domains import smooth_step_jet
from .fields import ScalarField
from .jet import FieldDomainError, Jet
from .psh import _fibonacci_sphere, eigen_sum, null_vector

__all__ = [
    "INSIDE",
    "OUTSIDE",
    "UNKNOWN",
    "HullError",
    "PenaltyField",
    "HullProblem",
    "HullVerdict",
    "PolyDisc",
    "QuadratureResult",
    "Certificate",
    "poisson_functional",
    "convex_hull_separation",
    "flat_disc_seed",
    "null_line_seed",
    "optimize_disc",
    "quadratic_certificate",
    "verify_certificate",
    "verify_witness",
    "minimal_hull_membership",
    "null_hull_membership",
    "polynomial_hull_proxy",
    "measure_convergence_check",
    "covered_measure",
    "measure_sequence",
    "degree_continuation",
    "inclusion_audit",
    "hull_sweep",
]

INSIDE, OUTSIDE, UNKNOWN = "INSIDE", "OUTSIDE", "UNKNOWN"
LP_TOL = 1e-9
GAP_MIN = 1e-6
HULL_NOTE = "OUTSIDE certificates are quadratic functions only; UNKNOWN may hide a decidable point"


class HullError(ValueError):
    pass


# -- penalty ------------------------------------------------------------------


class PenaltyField(ScalarField):
    """``M * (1 - step(dist(x, K) / eps))``: zero within ``eps`` of ``K``, equal
    to ``M`` beyond ``2 eps``, smooth in between.

    Distances are to the sample points of ``K``.  Outside ``box`` (when given)
    the field is undefined.
    """

    def __init__(self, K, eps: float, M: float = 10.0, box=None):
        self.K = np.atleast_2d(np.asarray(K, dtype=float))
        if len(self.K) == 0:
            raise HullError("K must be nonempty")
        self.dim = self.K.shape[1]
        self.eps, self.M = float(eps), float(M)
        if self.eps <= 0:
            raise HullError("collar width must be positive")
        self.tree = cKDTree(self.K)
        self.box = None if box is None else (np.asarray(box[0], float), np.asarray(box[1], float))

    def _check_box(self, X):
        if self.box is not None:
            lo, hi = self.box
            bad = np.any((X < lo) | (X > hi), axis=1)
            if np.any(bad):
                raise FieldDomainError("point outside the analysis box", np.flatnonzero(bad))

    def distance(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self._check_box(X)
        d, _ = self.tree.query(X)
        return d

    def values(self, X):
        """Fast value-only path used by the disc functional."""
        d = self.distance(X) / self.eps
        s = _ramp(d)
        return self.M * s

    def jet(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self._check_box(X)
        d, idx = self.tree.query(X)
        m, n = X.shape
        diff = X - self.K[idx]
        safe = np.maximum(d, 1e-300)
        nrm = diff / safe[:, None]
        dj = Jet(d, nrm, (np.eye(n)[None] - nrm[:, :, None] * nrm[:, None, :]) / safe[:, None, None])
        step = smooth_step_jet(dj * (1.0 / self.eps), 1.0, 2.0)
        return (Jet.constant(1.0, m, n) - step) * self.M


def _ramp(t):
    """``0`` for ``t <= 1``, ``1`` for ``t >= 2``, smooth in between."""
    u = np.clip(t - 1.0, 0.0, 1.0)
    out = np.zeros_like(u)
    mid = (u > 0) & (u < 1)
    a = np.exp(-1.0 / u[mid])
    b = np.exp(-1.0 / (1.0 - u[mid]))
    out[mid] = a / (a + b)
    out[u >= 1] = 1.0
    return out


@dataclass
class HullProblem:
    """Point cloud ``K`` with its penalty; ``kind`` is ``minimal`` (``K`` in
    R^n) or ``null`` (``K`` in C^n, stored as complex)."""

    K: np.ndarray
    kind: str = "minimal"
    eps: Optional[float] = None
    M: float = 10.0
    tol: Optional[float] = None

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K))
        if K.size == 0:
            raise HullError("K must be nonempty")
        if self.kind == "null":
            K = K.astype(complex)
        elif self.kind == "minimal":
            if np.iscomplexobj(K):
                raise HullError("minimal hulls need a real point cloud")
            K = K.astype(float)
        else:
            raise HullError(f"unknown hull kind {self.kind!r}")
        self.K = K
        R = self.real_cloud
        diam = float(_pairwise_max(R)) if len(R) > 1 else 0.0
        self.diam = diam if diam > 0 else 1.0
        if self.eps is None:
            self.eps = 0.02 * self.diam
        if self.tol is None:
            self.tol = 1e-3 * self.M
        self.penalty = PenaltyField(R, self.eps, self.M)

    @property
    def dim(self):
        return self.K.shape[1]

    @property
    def real_cloud(self):
        return _realify(self.K)


def _pairwise_max(R, chunk=2048):
    if len(R) <= chunk:
        D = np.linalg.norm(R[:, None] - R[None], axis=2)
        return D.max()
    from scipy.spatial import ConvexHull

    try:
        H = R[ConvexHull(R).vertices]
    except Exception:  # degenerate clouds (e.g. planar) fall back to a bound
        return 2 * np.max(np.linalg.norm(R - R.mean(0), axis=1))
    return _pairwise_max(H, chunk=len(H) + 1)


def _real_pair(K, x):
    """Real coordinates of a cloud and a query, complexifying the query to
    match a complex cloud."""
    K = np.atleast_2d(np.asarray(K))
    x = np.asarray(x)
    if np.iscomplexobj(K):
        x = x.astype(complex)
    return _realify(K), _realify(x)


def _realify(Z):
    Z = np.asarray(Z)
    if np.iscomplexobj(Z):
        return np.concatenate([Z.real, Z.imag], axis=-1)
    return Z.astype(float)


# -- discs ------------------------------------------------------------------


@dataclass
class PolyDisc:
    """Disc ``F(zeta) = center + int_0^zeta f (1-g^2)/2, i f (1+g^2)/2, f g``.

    ``f`` and ``g`` are complex coefficient arrays (ascending powers).  For
    ``kind='minimal'`` the real part is taken.
    """

    f: np.ndarray
    g: np.ndarray
    center: np.ndarray
    kind: str = "minimal"

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=complex)
        self.g = np.asarray(self.g, dtype=complex)
        self.center = np.asarray(self.center)

    @property
    def degree(self):
        return max(len(self.f), len(self.g)) - 1

    def primitive_coeffs(self):
        f, g = self.f, self.g
        g2 = np.convolve(g, g)
        one = np.zeros(len(g2), complex)
        one[0] = 1.0
        a = 0.5 * np.convolve(f, one - g2)
        b = 0.5j * np.convolve(f, one + g2)
        c = np.convolve(f, g)
        comps = []
        for p in (a, b, c):
            P = np.zeros(len(p) + 1, complex)
            P[1:] = p / np.arange(1, len(p) + 1)
            comps.append(P)
        L = max(len(p) for p in comps)
        return np.stack([np.pad(p, (0, L - len(p))) for p in comps], axis=1)

    def __call__(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        C = self.primitive_coeffs()
        pw = zeta[..., None] ** np.arange(len(C))
        Z = pw @ C
        if self.kind == "minimal":
            return self.center.real + Z.real
        return self.center + Z

    def derivative(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        C = self.primitive_coeffs()
        k = np.arange(len(C))
        pw = zeta[..., None] ** np.maximum(k - 1, 0)
        return pw @ (C * k[:, None])

    def boundary(self, nodes=256):
        t = 2 * np.pi * np.arange(nodes) / nodes
        return self(np.exp(1j * t))

    def to_dict(self):
        return {
            "kind": self.kind, "degree": self.degree,
            "f": [[float(c.real), float(c.imag)] for c in self.f],
            "g": [[float(c.real), float(c.imag)] for c in self.g],
            "center": _json_point(self.center),
        }


def _json_point(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return [[float(v.real), float(v.imag)] for v in x]
    return [float(v) for v in x]


@dataclass
class QuadratureResult:
    value: float
    error: float
    nodes: int

    def __float__(self):
        return float(self.value)


def poisson_functional(phi, F, nodes: int = 256) -> QuadratureResult:
    """Mean of ``phi`` over the boundary circle of the disc ``F``.

    Periodic trapezoid rule with ``nodes`` points (at least 256); the error
    estimate is the difference to the rule on every other node.
    """
    if nodes < 256:
        raise HullError("the boundary quadrature needs at least 256 nodes")
    t = 2 * np.pi * np.arange(nodes) / nodes
    P = F(np.exp(1j * t)) if callable(F) else np.asarray(F)
    P = _realify(P)
    vals = phi.values(P) if hasattr(phi, "values") else phi.value(P)
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (nodes,))
    if not np.all(np.isfinite(vals)):
        raise FieldDomainError("boundary leaves the penalty domain", np.flatnonzero(~np.isfinite(vals)))
    full = float(vals.mean())
    half = float(vals[::2].mean())
    return QuadratureResult(full, abs(full - half), nodes)


def _normal_to_g(N):
    N = np.asarray(N, dtype=float)
    N = N / np.linalg.norm(N)
    if N[2] > 0:
        N = -N
    return complex(N[0], N[1]) / (1 - N[2])


def flat_disc_seed(center, normal, radius) -> PolyDisc:
    """Flat disc of the given radius orthogonal to ``normal``."""
    g0 = _normal_to_g(normal)
    f0 = 2 * radius / (1 + abs(g0) ** 2)
    return PolyDisc(np.array([f0], complex), np.array([g0], complex), np.asarray(center, float), "minimal")


def null_line_seed(center, g0, radius) -> PolyDisc:
    """Null disc ``center + radius * theta * zeta`` with ``theta`` over ``g0``,
    normalized so that ``|Re theta| = |Im theta| = 1``."""
    w = null_vector(g0)
    s = math.sqrt(2.0) / np.linalg.norm(w)
    return PolyDisc(np.array([radius * s], complex), np.array([complex(g0)], complex),
                    np.asarray(center, complex), "null")


def mobius_seed(problem: HullProblem, x, degree: int) -> PolyDisc:
    """Best-fit flat disc of ``K`` reparametrized so that ``0`` maps over ``x``.

    With ``V`` the constant null direction of the flat disc and ``a`` the
    complex coordinate of ``x`` in its plane, ``F = c + Re(V m)`` for the disc
    automorphism ``m(zeta) = (zeta + a) / (1 + conj(a) zeta)``; the factor
    ``m'`` is expanded in powers of ``zeta`` up to ``degree``.
    """
    R = problem.real_cloud
    c0 = R.mean(0)
    _, _, Vt = np.linalg.svd(R - c0, full_matrices=False)
    N = Vt[-1]
    diff = R - c0
    proj = diff - np.outer(diff @ N, N)
    radius = float(np.median(np.linalg.norm(proj, axis=1)))
    seed = flat_disc_seed(c0, N, radius)
    V = seed.primitive_coeffs()[1]
    A = np.stack([V.real, -V.imag], axis=1)
    sol, *_ = np.linalg.lstsq(A, np.asarray(x, float) - c0, rcond=None)
    a = complex(sol[0], sol[1])
    if abs(a) >= 0.999:
        a *= 0.999 / abs(a)
    k = np.arange(degree + 1)
    f = seed.f[0] * (1 - abs(a) ** 2) * (k + 1) * (-np.conj(a)) ** k
    g = np.zeros(degree + 1, complex)
    g[0] = seed.g[0]
    return PolyDisc(f, g, np.asarray(x, float), "minimal")


def _pack(d: PolyDisc, degree):
    f = np.pad(d.f, (0, degree + 1 - len(d.f)))
    g = np.pad(d.g, (0, degree + 1 - len(d.g)))
    return np.concatenate([f.real, f.imag, g.real, g.imag])


def _unpack(p, degree, center, kind):
    k = degree + 1
    f = p[:k] + 1j * p[k:2 * k]
    g = p[2 * k:3 * k] + 1j * p[3 * k:]
    return PolyDisc(f, g, center, kind)


class _FastFunctional:
    """Penalty mean over the boundary for packed coefficient vectors."""

    def __init__(self, problem: HullProblem, center, degree, kind, nodes=256):
        self.problem, self.center, self.degree, self.kind = problem, center, degree, kind
        t = 2 * np.pi * np.arange(nodes) / nodes
        L = 3 * degree + 2
        self.pw = np.exp(1j * t)[:, None] ** np.arange(L)
        self.nodes = nodes
        self.evals = 0

    def __call__(self, p):
        self.evals += 1
        d = _unpack(p, self.degree, self.center, self.kind)
        C = d.primitive_coeffs()
        Z = self.pw[:, : len(C)] @ C
        P = self.center.real + Z.real if self.kind == "minimal" else _realify(self.center + Z)
        try:
            return float(self.problem.penalty.values(P).mean())
        except FieldDomainError:
            return float(self.problem.M)


def _seeds(problem: HullProblem, x, starts: int, rng):
    """Deterministic seed discs: the best-fit plane of ``K`` first, then
    spread normals; radii from the projected distances of ``K``."""
    R = problem.real_cloud
    if problem.kind == "minimal":
        C = R - R.mean(0)
        _, _, Vt = np.linalg.svd(C, full_matrices=False)
        normals = [Vt[-1]] + list(_fibonacci_sphere(max(starts, 2)))
        out = [mobius_seed(problem, x, 1)] if starts > 1 else []
        for N in normals[:starts - len(out)]:
            N = np.asarray(N, float) / np.linalg.norm(N)
            diff = R - x
            proj = diff - np.outer(diff @ N, N)
            out.append(flat_disc_seed(x, N, float(np.median(np.linalg.norm(proj, axis=1)))))
        return out
    # null discs: null directions spread over the sphere of g values
    K = problem.K
    rad = float(np.median(np.linalg.norm(_realify(K - x), axis=1))) / math.sqrt(2.0)
    P = _fibonacci_sphere(max(starts, 2))
    gs = [complex(0.0)] + [complex(p[0], p[1]) / (1 - p[2]) if p[2] < 1 - 1e-12 else complex(1e6) for p in P]
    # best-fit complex line of K; theta = f((1-g^2)/2, i(1+g^2)/2, g) gives g = theta3 / (theta1 - i theta2)
    _, _, Vh = np.linalg.svd(K - K.mean(0), full_matrices=False)
    th = Vh[0]
    den = th[0] - 1j * th[1]
    if abs(den) > 1e-12:
        gs.insert(0, complex(th[2] / den))
    return [null_line_seed(x, g, rad) for g in gs[:starts]]


@dataclass
class DiscSearch:
    best: PolyDisc
    value: float
    evaluations: int
    exhausted: bool
    history: list = field(default_factory=list)


def optimize_disc(problem: HullProblem, x, degree: int = 4, starts: int = 16, budget: int = 10_000,
                  seed: int = 0, seeds: Sequence[PolyDisc] = (), warm: Optional[PolyDisc] = None,
                  stop_at: Optional[float] = None) -> DiscSearch:
    """Multi-start Nelder-Mead over disc coefficients up to ``degree``.

    Every start receives an equal share of ``budget`` evaluations.  User
    ``seeds`` and ``warm`` starts come before the automatic ones.  With
    ``stop_at`` the search ends as soon as a value at or below it is found.
    """
    kind = problem.kind
    x = np.asarray(x, dtype=complex if kind == "null" else float)
    rng = np.random.default_rng(seed)
    start_discs = ([warm] if warm is not None else []) + list(seeds)
    start_discs += _seeds(problem, x, max(starts - len(start_discs), 0), rng)
    fun = _FastFunctional(problem, x, degree, kind)
    share = max(budget // max(len(start_discs), 1), 4 * (degree + 1) + 1)
    best_p, best_v, history = None, np.inf, []
    for d in start_discs:
        if fun.evals >= budget:
            break
        d = PolyDisc(d.f, d.g, x, kind)
        p0 = _pack(d, degree)
        v0 = fun(p0)
        if v0 < best_v:
            best_p, best_v = p0, v0
        if stop_at is not None and best_v <= stop_at:
            history.append(v0)
            break
        # deterministic initial simplex scaled to the seed
        scale = max(np.abs(p0).max(), 0.1)
        sim = np.vstack([p0, p0 + 0.1 * scale * np.eye(len(p0)) * rng.choice([-1.0, 1.0], len(p0))])
        left = min(share, budget - fun.evals)
        res = minimize(fun, p0, method="Nelder-Mead",
                       options={"maxfev": max(left - 1, 1), "initial_simplex": sim, "xatol": 1e-10, "fatol": 1e-14})
        history.append(float(res.fun))
        if res.fun < best_v:
            best_p, best_v = np.asarray(res.x), float(res.fun)
        if stop_at is not None and best_v <= stop_at:
            break
    best = _unpack(best_p, degree, x, kind)
    exhausted = fun.evals >= budget and not (stop_at is not None and best_v <= stop_at)
    return DiscSearch(best, float(best_v), fun.evals, exhausted, history)


def degree_continuation(problem: HullProblem, x, degree: int = 4, starts: int = 16, budget: int = 10_000,
                        seed: int = 0, seeds: Sequence[PolyDisc] = (), warm: Optional[PolyDisc] = None,
                        stop_at: Optional[float] = None) -> DiscSearch:
    """Search degrees ``1..degree`` in turn, warm-starting each from the best
    disc of the previous one.  Degree 1 explores all ``starts``; later degrees
    refine the warm start plus two fresh seeds.  The best value is therefore
    non-increasing in the degree."""
    d0 = 1 if warm is None else min(max(warm.degree, 1), degree)
    degrees = list(range(d0, degree + 1))
    # budget shares proportional to the number of coefficients
    weights = np.array([4 * (d + 1) for d in degrees], dtype=float)
    shares = np.floor(budget * weights / weights.sum()).astype(int)
    total, history = 0, []
    best = None
    for k, d in enumerate(degrees):
        first = k == 0
        share = shares[k] if k < len(degrees) - 1 else budget - total
        extra = () if first or problem.kind != "minimal" else (mobius_seed(problem, x, d),)
        res = optimize_disc(problem, x, d, starts if first else 3, share, seed + d,
                            seeds if first else extra, warm if first else best.best, stop_at)
        total += res.evaluations
        history.append(res.value)
        if best is None or res.value <= best.value:
            best = DiscSearch(res.best, res.value, total, False, [])
        else:
            best = DiscSearch(best.best, best.value, total, False, [])
        if stop_at is not None and best.value <= stop_at:
            break
    best.history = history
    best.exhausted = total >= budget - degree and not (stop_at is not None and best.value <= stop_at)
    return best


# -- convex hull ------------------------------------------------------------


def convex_hull_separation(K, x):
    """Maximize ``l.x - max_K l.k`` over ``|l_i| <= 1``.

    Returns ``(gap, l)``; ``gap > 1e-9`` means ``x`` lies outside ``Co(K)``.
    """
    R, xr = _real_pair(K, x)
    n = R.shape[1]
    # variables (l, s): maximize l.x - s subject to l.k - s <= 0
    c = np.concatenate([-xr, [1.0]])
    A = np.hstack([R, -np.ones((len(R), 1))])
    res = linprog(c, A_ub=A, b_ub=np.zeros(len(R)), bounds=[(-1, 1)] * n + [(None, None)], method="highs")
    if res.status != 0:
        raise HullError(f"convex hull LP failed: {res.message}")
    l = res.x[:n]
    gap = float(l @ xr - np.max(R @ l))
    return gap, l


# -- quadratic certificates -------------------------------------------------


@dataclass
class Certificate:
    """``q(xi) = xi.Q.xi + l.xi + c`` on the real coordinates; ``cls`` is
    ``linear``, ``p-psh`` (with ``p``), ``null-psh`` or ``psh``."""

    Q: np.ndarray
    l: np.ndarray
    c: float
    cls: str
    p: Optional[int] = None
    gap: float = 0.0
    margin: float = 0.0

    def __call__(self, X):
        X = np.atleast_2d(_realify(np.asarray(X)))
        return np.einsum("mi,ij,mj->m", X, self.Q, X) + X @ self.l + self.c

    def to_dict(self):
        return {"class": self.cls, "p": self.p, "Q": self.Q.tolist(), "l": self.l.tolist(), "c": self.c,
                "gap": self.gap, "admissibility_margin": self.margin}


def _sym_index(n):
    return [(a, b) for a in range(n) for b in range(a, n)]


def _quad_row(u, pairs):
    """Coefficients of ``u.Q.u`` in the upper-triangle variables."""
    return np.array([u[a] * u[b] * (1.0 if a == b else 2.0) for a, b in pairs])


def _to_Q(z, n, pairs):
    Q = np.zeros((n, n))
    for val, (a, b) in zip(z, pairs):
        Q[a, b] = Q[b, a] = val
    return Q


def _J(n2):
    n = n2 // 2
    J = np.zeros((n2, n2))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def _levi_real(Q):
    """``S`` with ``v.S.v`` the Levi form of ``xi.Q.xi`` in direction ``v``
    (real coordinates of a complex vector)."""
    J = _J(len(Q))
    H = 2 * Q
    return 0.25 * (H + J.T @ H @ J)


def _null_real(g, chart=0):
    if chart == 0:
        w = null_vector(g)
    else:
        h = complex(g)
        w = np.array([(h * h - 1) / 2, 1j * (h * h + 1) / 2, h])
    return np.concatenate([w.real, w.imag])


def _min_null_levi(S, grid=400, refine=4, offset=0.0):
    """Minimum of ``v.S.v / |v|^2`` over null directions in C^3."""
    P = _fibonacci_sphere(grid)
    if offset:
        # independent grid: rotate the sphere points
        c, s = math.cos(offset), math.sin(offset)
        P = P @ np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]).T
        P = P @ np.array([[1, 0, 0], [0, c, -s], [0, s, c]]).T
    cand = []
    for p in P:
        if p[2] <= 0:
            cand.append((complex(p[0], p[1]) / (1 - p[2]), 0))
        else:
            cand.append((complex(p[0], -p[1]) / (1 + p[2]), 1))

    def val(g, chart):
        v = _null_real(g, chart)
        return float(v @ S @ v / (v @ v))

    vals = np.array([val(g, ch) for g, ch in cand])
    best_v, best_vec = np.inf, None
    for k in np.argsort(vals)[:refine]:
        g0, ch = cand[k]
        res = minimize(lambda q: val(complex(q[0], q[1]), ch), [g0.real, g0.imag], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400})
        if res.fun < best_v:
            best_v = float(res.fun)
            v = _null_real(complex(*res.x), ch)
            best_vec = v / np.linalg.norm(v)
    return best_v, best_vec


def _admissibility(Q, cls, p):
    """Margin of the admissibility condition and the cut directions."""
    if cls == "p-psh":
        lam, V = np.linalg.eigh(2 * Q)
        return float(lam[:p].sum()), [V[:, :p]]
    if cls == "psh":
        lam, V = np.linalg.eigh(_levi_real(Q))
        return float(lam[0]), [V[:, :1]]
    if cls == "null-psh":
        m, v = _min_null_levi(_levi_real(Q))
        return m, [v[:, None]]
    raise HullError(f"unknown certificate class {cls!r}")


def _cut_row(frame, cls, n, pairs):
    if cls == "p-psh":
        return sum(2 * _quad_row(frame[:, j], pairs) for j in range(frame.shape[1]))
    v = frame[:, 0]
    J = _J(n)
    # v.S.v = (v.Hv + Jv.H.Jv) / 4 with H = 2Q
    return 0.5 * (_quad_row(v, pairs) + _quad_row(J @ v, pairs))


def quadratic_certificate(K, x, cls: str = "p-psh", p: int = 2, max_cuts: int = 200) -> Optional[Certificate]:
    """Cutting-plane LP for a separating quadratic.

    Maximizes ``q(x) - max_K q`` over ``|Q_ab|, |l_i| <= 1`` subject to the
    class condition, which is convex in ``Q`` and enforced by linear cuts
    along worst directions.  Returns a verified certificate or ``None``.
    """
    R, xr = _real_pair(K, x)
    n = R.shape[1]
    if cls in ("psh", "null-psh") and n % 2:
        raise HullError("complex certificate classes need an even real dimension")
    if cls == "null-psh" and n != 6:
        raise HullError("null-psh certificates are implemented for C^3")
    pairs = _sym_index(n)
    nq = len(pairs)
    Dq = np.array([_quad_row(xr, pairs) - _quad_row(k, pairs) for k in R])
    Dl = xr[None] - R
    # variables (Qvec, l, s); maximize s s.t. s - Dq.Q - Dl.l <= 0
    A_sep = np.hstack([-Dq, -Dl, np.ones((len(R), 1))])
    cuts = []
    if cls == "p-psh":
        for j in range(n):  # start with coordinate frames
            frame = np.eye(n)[:, [(j + i) % n for i in range(p)]]
            cuts.append(_cut_row(frame, cls, n, pairs))
    else:
        for j in range(n):
            cuts.append(_cut_row(np.eye(n)[:, [j]], cls, n, pairs))
    c = np.zeros(nq + n + 1)
    c[-1] = -1.0
    bounds = [(-1, 1)] * (nq + n) + [(None, None)]
    Q = l = None
    for _ in range(max_cuts):
        A_cut = np.hstack([-np.array(cuts), np.zeros((len(cuts), n + 1))])
        res = linprog(c, A_ub=np.vstack([A_sep, A_cut]), b_ub=np.zeros(len(R) + len(cuts)), bounds=bounds,
                      method="highs")
        if res.status != 0:
            return None
        z = res.x
        Q, l = _to_Q(z[:nq], n, pairs), z[nq:nq + n]
        margin, frames = _admissibility(Q, cls, p)
        if margin >= -1e-12:
            break
        for fr in frames:
            cuts.append(_cut_row(fr, cls, n, pairs))
    if Q is None:
        return None
    margin, _ = _admissibility(Q, cls, p)
    if margin < 0:
        # shift by a multiple of the identity, which raises every margin
        tau = -margin / (p if cls == "p-psh" else 1.0) + 1e-12
        Q = Q + (tau / 2 if cls == "p-psh" else tau) * np.eye(n)
    cert = Certificate(Q, l, 0.0, cls, p if cls == "p-psh" else None)
    cert.c = -float(np.max(cert(R)))
    cert.gap = float(cert(xr[None])[0])
    cert.margin = verify_certificate(cert, R, xr)["margin"]
    if cert.gap > GAP_MIN and cert.margin >= -LP_TOL:
        return cert
    return None


def verify_certificate(cert: Certificate, K, x) -> dict:
    """Independent re-check: admissibility margin and separation gap."""
    R, xr = _real_pair(K, x)
    if cert.cls == "linear":
        margin = 0.0
    elif cert.cls == "p-psh":
        margin = eigen_sum(2 * cert.Q, cert.p)
    elif cert.cls == "psh":
        margin = float(np.linalg.eigvalsh(_levi_real(cert.Q))[0])
    else:
        # finer, rotated grid than the one used during the search
        margin = _min_null_levi(_levi_real(cert.Q), grid=900, refine=6, offset=0.37)[0]
    gap = float(cert(xr[None])[0] - np.max(cert(R)))
    return {"margin": float(margin), "gap": gap, "ok": bool(margin >= -LP_TOL and gap > GAP_MIN)}


# -- verdicts ---------------------------------------------------------------


@dataclass
class HullVerdict:
    status: str
    kind: str
    query: list
    route: str
    witness: Optional[dict] = None
    certificate: Optional[Certificate] = None
    best_functional: Optional[float] = None
    best_gap: Optional[float] = None
    evaluations: int = 0
    budget_exhausted: bool = False
    notes: list = field(default_factory=list)
    disc: Optional[PolyDisc] = None

    def to_dict(self):
        return {
            "status": self.status, "kind": self.kind, "query": self.query, "route": self.route,
            "witness": self.witness,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "best_functional": self.best_functional, "best_gap": self.best_gap,
            "evaluations": self.evaluations, "budget_exhausted": self.budget_exhausted, "notes": self.notes,
        }


def verify_witness(problem: HullProblem, disc: PolyDisc, x, tol=None) -> dict:
    """Center check and the functional on a 4x finer quadrature."""
    tol = problem.tol if tol is None else tol
    c = disc(np.array([0j]))[0]
    center_err = float(np.max(np.abs(np.asarray(c) - np.asarray(x))))
    q = poisson_functional(problem.penalty, disc, nodes=1024)
    return {"center_error": center_err, "functional": q.value, "error": q.error,
            "ok": bool(center_err <= 1e-10 and q.value <= tol)}


def _decide(problem: HullProblem, x, cls, p, degree, starts, budget, seed, lp_prefilter, seeds):
    notes = [HULL_NOTE]
    xq = np.asarray(x, dtype=complex if problem.kind == "null" else float)
    if xq.shape != (problem.dim,):
        raise HullError(f"query must have {problem.dim} coordinates")
    qlist = _json_point(xq)
    gap_lp = None
    if lp_prefilter:
        gap_lp, lvec = convex_hull_separation(problem.K, xq)
        if gap_lp > LP_TOL:
            R = problem.real_cloud
            cert = Certificate(np.zeros((len(lvec), len(lvec))), lvec, -float(np.max(R @ lvec)), "linear")
            cert.gap = gap_lp
            return HullVerdict(OUTSIDE, problem.kind, qlist, "lp", certificate=cert, best_gap=gap_lp, notes=notes)
    if problem.dim != 3:
        notes.append("disc search needs n = 3; skipped")
        search = None
    else:
        search = degree_continuation(problem, xq, degree, starts, budget, seed, seeds, stop_at=problem.tol)
        if search.value <= problem.tol:
            w = verify_witness(problem, search.best, xq)
            if w["ok"]:
                witness = search.best.to_dict()
                witness.update({"functional": w["functional"], "quadrature_error": w["error"],
                                "center_error": w["center_error"]})
                return HullVerdict(INSIDE, problem.kind, qlist, "disc", witness=witness,
                                   best_functional=w["functional"], evaluations=search.evaluations,
                                   notes=notes, disc=search.best)
            notes.append("witness failed the fine-quadrature re-check")
    cert = quadratic_certificate(problem.K, xq, cls, p)
    best_f = None if search is None else search.value
    evals = 0 if search is None else search.evaluations
    exhausted = bool(search is not None and search.exhausted)
    if cert is not None:
        return HullVerdict(OUTSIDE, problem.kind, qlist, "quadratic", certificate=cert, best_functional=best_f,
                           best_gap=cert.gap, evaluations=evals, budget_exhausted=exhausted, notes=notes)
    if exhausted:
        notes.append("disc search budget exhausted")
    return HullVerdict(UNKNOWN, problem.kind, qlist, "none", best_functional=best_f, best_gap=gap_lp,
                       evaluations=evals, budget_exhausted=exhausted, notes=notes,
                       disc=None if search is None else search.best)


def minimal_hull_membership(K, x, budget: int = 10_000, degree: int = 4, starts: int = 16, eps=None,
                            M: float = 10.0, tol=None, seed: int = 0, lp_prefilter: bool = True,
                            seeds: Sequence[PolyDisc] = ()) -> HullVerdict:
    """Decide ``x`` against the minimal hull of ``K`` in R^3."""
    problem = K if isinstance(K, HullProblem) else HullProblem(K, "minimal", eps, M, tol)
    return _decide(problem, x, "p-psh", 2, degree, starts, budget, seed, lp_prefilter, seeds)


def null_hull_membership(K, z, budget: int = 10_000, degree: int = 4, starts: int = 16, eps=None,
                         M: float = 10.0, tol=None, seed: int = 0, lp_prefilter: bool = True,
                         seeds: Sequence[PolyDisc] = ()) -> HullVerdict:
    """Decide ``z`` against the null hull of ``K`` in C^3."""
    problem = K if isinstance(K, HullProblem) else HullProblem(K, "null", eps, M, tol)
    return _decide(problem, z, "null-psh", None, degree, starts, budget, seed, lp_prefilter, seeds)


def polynomial_hull_proxy(K, z) -> str:
    """OUTSIDE when a linear or plurisubharmonic quadratic separates ``z``,
    UNKNOWN otherwise."""
    gap, _ = convex_hull_separation(K, z)
    if gap > LP_TOL:
        return OUTSIDE
    return OUTSIDE if quadratic_certificate(K, z, "psh") is not None else UNKNOWN


# -- boundary measure -------------------------------------------------------


def covered_measure(K, F, j: float, nodes: int = 4096) -> float:
    """Measure of ``{t : dist(F(e^{it}), K) < 1/j}`` by the rectangle rule."""
    R = _realify(np.atleast_2d(K))
    t = 2 * np.pi * np.arange(nodes) / nodes
    P = _realify(F(np.exp(1j * t)))
    d, _ = cKDTree(R).query(P)
    return float(np.count_nonzero(d < 1.0 / j) * 2 * np.pi / nodes)


def measure_sequence(K, x, js=(1, 2, 4), degree: int = 4, budget: int = 4000, seed: int = 0) -> list:
    """Rerun the disc search with collars ``0.5 / j``, warm-starting each run
    from the previous disc; report the covered measure at each ``j``."""
    out, warm = [], None
    for j in js:
        problem = HullProblem(K, "minimal", eps=0.5 / j)
        res = degree_continuation(problem, x, degree, 4, budget, seed, warm=warm)
        warm = res.best
        out.append({"j": j, "functional": res.value, "measure": covered_measure(K, res.best, j),
                    "passes": measure_convergence_check(K, res.best, j)})
    return out


def measure_convergence_check(K, F, j: float, nodes: int = 4096) -> bool:
    """True iff the covered boundary measure is at least ``2 pi - 1/j``."""
    return covered_measure(K, F, j, nodes) >= 2 * np.pi - 1.0 / j


# -- audits -----------------------------------------------------------------


def inclusion_audit(K, queries, budget: int = 2000, degree: int = 2, starts: int = 4, seed: int = 0) -> dict:
    """Check the inclusion chain and the soundness of every verdict."""
    problem = HullProblem(K, "minimal")
    rows, ok = [], True
    for x in np.atleast_2d(queries):
        v = minimal_hull_membership(problem, x, budget=budget, degree=degree, starts=starts, seed=seed)
        gap, _ = convex_hull_separation(problem.K, x)
        row = {"query": v.query, "status": v.status, "route": v.route, "lp_gap": gap}
        if v.status == INSIDE:
            row["chain"] = gap <= LP_TOL
            row["sound"] = verify_witness(problem, v.disc, x)["ok"]
        elif v.status == OUTSIDE:
            row["chain"] = True
            row["sound"] = verify_certificate(v.certificate, problem.K, x)["ok"] or v.route == "lp"
        else:
            row["chain"] = row["sound"] = True
        ok &= row["chain"] and row["sound"]
        rows.append(row)
    return {"passed": bool(ok), "rows": rows}


def hull_sweep(K, plane: str = "xz", extent: float = 1.5, offset: float = 0.0, grid: int = 11, **kwargs):
    """Minimal-hull verdicts over a square slice; rows ``(x, y, z, status)``."""
    axes = {"xy": (0, 1, 2), "xz": (0, 2, 1), "yz": (1, 2, 0)}
    if plane not in axes:
        raise HullError(f"plane must be one of {sorted(axes)}")
    a, b, c = axes[plane]
    problem = HullProblem(K, "minimal")
    s = np.linspace(-extent, extent, grid)
    out = []
    for u in s:
        for v in s:
            x = np.zeros(3)
            x[a], x[b], x[c] = u, v, offset
            out.append((*x.tolist(), minimal_hull_membership(problem, x, **kwargs).status))
    return out
