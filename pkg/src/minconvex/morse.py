"""Nice Morse critical points and the function used to cross an index-one
critical level of a minimal strongly plurisubharmonic function."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

from .fields import Profile, ScalarField
from .jet import Jet
from .psh import eigen_sums
from .domains import smooth_step_jet


class NotCriticalError(ValueError):
    pass


class DegenerateCriticalPointError(ValueError):
    pass


class ProfileConstructionError(RuntimeError):
    def __init__(self, message, worst=None):
        super().__init__(message)
        self.worst = worst


class ValidationError(RuntimeError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


# -- nice critical points ---------------------------------------------------


class NiceField(ScalarField):
    """``Q + chi(|x - x0| / eps) (rho - Q)`` with ``Q`` the quadratic Taylor
    polynomial at the critical point ``x0``."""

    def __init__(self, rho, x0, eps, value, hess):
        self.rho, self.x0, self.eps = rho, np.asarray(x0, dtype=float), float(eps)
        self.v0, self.H0 = float(value), np.asarray(hess, dtype=float)
        self.dim = rho.dim

    def quadratic_jet(self, X):
        xs = Jet.variables(np.asarray(X, dtype=float) - self.x0)
        q = Jet.constant(self.v0, len(X), self.dim)
        for i in range(self.dim):
            for j in range(self.dim):
                if self.H0[i, j] != 0:
                    q = q + (0.5 * self.H0[i, j]) * (xs[i] * xs[j])
        return q

    def jet(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        q = self.quadratic_jet(X)
        d = Jet.variables(X - self.x0)
        s2 = sum((x * x for x in d[1:]), d[0] * d[0]) * (1.0 / self.eps**2)
        # chi vanishes for |x - x0| <= eps and equals 1 for |x - x0| >= 2 eps
        chi = 1.0 - smooth_step_jet(s2, 1.0, 4.0)
        eta = self.rho.jet(X) - q
        return q + chi * eta


def make_nice(rho: ScalarField, x0, eps: float, crit_tol: float = 1e-10, samples: int = 1000, seed: int = 0):
    """Replace ``rho`` by its quadratic Taylor polynomial on the ``eps`` ball
    around the critical point ``x0``; unchanged outside ``2 eps``.

    Returns ``(field, report)``; the report holds the C^2 distance to ``rho``
    measured on the transition shell.  If ``rho - Q`` vanishes on the ``2 eps``
    ball the original field is returned.
    """
    x0 = np.asarray(x0, dtype=float)
    v, g, H = rho.evaluate(x0)
    if np.linalg.norm(g) > crit_tol:
        raise NotCriticalError(f"gradient norm {np.linalg.norm(g):.3e} at x0")
    lam = np.linalg.eigvalsh(H)
    if np.min(np.abs(lam)) <= 1e-8:
        raise DegenerateCriticalPointError("Hessian at x0 is degenerate")
    nice = NiceField(rho, x0, eps, v, H)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((samples, rho.dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = eps * (1 + rng.random(samples))
    shell = x0 + r[:, None] * d
    a = rho.evaluate(shell)
    b = nice.evaluate(shell)
    dist = max(float(np.max(np.abs(a[0] - b[0]))), float(np.max(np.abs(a[1] - b[1]))),
               float(np.max(np.abs(a[2] - b[2]))))
    ball = x0 + (2 * eps * rng.random(samples))[:, None] * d
    eta = rho.value(ball) - nice.quadratic_jet(ball).v
    report = {"c2_distance": dist, "shell_samples": samples, "eta_max": float(np.max(np.abs(eta)))}
    if report["eta_max"] <= 1e-14 * max(1.0, abs(v)):
        report["unchanged"] = True
        return rho, report
    report["unchanged"] = False
    return nice, report


# -- the convex profile h ---------------------------------------------------


def _smoothstep():
    # quintic 0 -> 1 on [0, 1] with vanishing first and second derivatives at both ends
    return Polynomial([0, 0, 0, 10, -15, 6])


@dataclass
class ProfileH:
    """Convex increasing ``h`` with ``h = 0`` for ``t <= t0`` and ``h = t - t1``
    for ``t >= c0``.

    Built in the variable ``u = sqrt(t)``: ``q(u) = 2 t h'' + h'`` is a smooth
    ramp ``0 -> L``, a plateau at ``L`` and a ramp ``L -> 1`` on ``[u0, uc]``,
    with ``L`` fixed by ``h'(c0) = 1``.  Then ``h'(t) = Q(u)/u`` with
    ``Q' = q`` and ``h(t) = 2 * integral of Q du``.  Each piece is a polynomial
    in the offset from its left break point.
    """

    c0: float
    lam: float
    mu: float
    t0: float
    t1: float
    level: float
    ramp: float
    breaks: np.ndarray = field(repr=False)
    q_pieces: list = field(repr=False)
    Q_pieces: list = field(repr=False)
    H_pieces: list = field(repr=False)
    checks: dict = field(default_factory=dict)

    def _piece_eval(self, pieces, u):
        out = np.zeros_like(u)
        idx = np.clip(np.searchsorted(self.breaks, u, side="right") - 1, 0, len(pieces) - 1)
        for k, p in enumerate(pieces):
            sel = idx == k
            if np.any(sel):
                out[sel] = p(u[sel] - self.breaks[k])
        return out

    def derivatives(self, t):
        """``(h, h', h'')`` at ``t`` (any real array)."""
        t = np.asarray(t, dtype=float)
        h = np.zeros_like(t)
        d1 = np.zeros_like(t)
        d2 = np.zeros_like(t)
        hi = t >= self.c0
        h[hi] = t[hi] - self.t1
        d1[hi] = 1.0
        mid = (t > self.t0) & ~hi
        if np.any(mid):
            u = np.sqrt(t[mid])
            q = self._piece_eval(self.q_pieces, u)
            Q = self._piece_eval(self.Q_pieces, u)
            h[mid] = self._piece_eval(self.H_pieces, u)
            d1[mid] = Q / u
            d2[mid] = (q * u - Q) / (2 * u**3)
        return h, d1, d2

    def __call__(self, t):
        return self.derivatives(t)[0]

    @property
    def profile(self) -> Profile:
        return Profile(lambda t: self.derivatives(t)[0], lambda t: self.derivatives(t)[1],
                       lambda t: self.derivatives(t)[2], "h")

    def verify(self, points: int = 2000, tol: float = 1e-10):
        """Grid check of the four defining conditions plus convexity."""
        t = np.linspace(-0.1 * self.c0, 1.1 * self.c0, points)
        h, d1, d2 = self.derivatives(t)
        lo = t <= self.t0
        hi = t >= self.c0
        mid = ~lo & ~hi
        q = 2 * t * d2 + d1
        res = {
            "i": float(np.max(np.abs(h[lo]))) if np.any(lo) else 0.0,
            "ii": float(np.max(np.abs(h[hi] - (t[hi] - self.t1)))) if np.any(hi) else 0.0,
            "iii_low": float(np.min(h[mid] - (t[mid] - self.t1))) if np.any(mid) else 0.0,
            "iii_high": float(np.min((t[mid] - self.t0) - h[mid])) if np.any(mid) else 0.0,
            "iv_dh_min": float(d1.min()),
            "iv_dh_max": float(d1.max()),
            "iv_q_max": float(q.max()),
            "convex_min": float(d2.min()),
        }
        ok = {
            "i": res["i"] <= tol,
            "ii": res["ii"] <= tol,
            "iii": res["iii_low"] >= -tol and res["iii_high"] >= -tol,
            "iv": res["iv_dh_min"] >= -tol and res["iv_dh_max"] <= 1 + tol and res["iv_q_max"] < self.lam,
            "convex": res["convex_min"] >= -1e-10,
            "t1_in_range": self.t0 < self.t1 < self.c0,
        }
        k = int(np.argmax(q))
        return {"values": res, "ok": ok, "passed": all(ok.values()), "grid": points,
                "worst_q_point": float(t[k])}


def _assemble(c0, mu, f):
    u0 = np.sqrt(c0) * (1 - 1 / mu)
    uc = np.sqrt(c0)
    W = uc - u0
    L = (mu - f / 2) / (1 - f)
    S = _smoothstep()
    w = f * W
    b = np.array([u0, u0 + w, uc - w, uc])
    # piece k is a polynomial in s = u - b[k]; a local variable avoids cancellation
    s = Polynomial([0.0, 1 / w])
    q = [L * S(s), Polynomial([L]), L + (1 - L) * S(s)]
    Qp, Hp = [], []
    Qc, Hc = 0.0, 0.0
    for k, p in enumerate(q):
        P = p.integ() + Qc
        Qp.append(P)
        Qc = P(b[k + 1] - b[k])
        R = 2 * P.integ() + Hc
        Hp.append(R)
        Hc = R(b[k + 1] - b[k])
    return b, q, Qp, Hp, L, Hc


def build_h(c0: float, lam: float, mu: float, grid: int = 2000, max_halvings: int = 30) -> ProfileH:
    """Profile with ``t0 = c0 (1 - 1/mu)^2``; the ramp width fraction starts at
    1/2 and is halved until ``2 t h'' + h' < lam`` holds on the grid."""
    if not (lam > 1 and 1 < mu < lam and c0 > 0):
        raise ValueError("need lam > 1, 1 < mu < lam and c0 > 0")
    t0 = c0 * (1 - 1 / mu) ** 2
    f = 0.5
    last = None
    for _ in range(max_halvings):
        b, q, Qp, Hp, L, Hc = _assemble(c0, mu, f)
        t1 = c0 - Hc
        prof = ProfileH(c0, lam, mu, t0, t1, L, f, b, q, Qp, Hp)
        chk = prof.verify(grid)
        if chk["passed"]:
            prof.checks = chk
            return prof
        last = chk
        f *= 0.5
    raise ProfileConstructionError("profile conditions could not be met", last)


# -- tau --------------------------------------------------------------------


class NormalFormField(ScalarField):
    """``-a1 x1^2 + a2 x2^2 + a3 x3^2 + eta``."""

    dim = 3

    def __init__(self, a, eta=None):
        self.a = np.asarray(a, dtype=float)
        self.eta = eta

    def jet(self, X):
        x1, x2, x3 = Jet.variables(X)
        j = (-self.a[0]) * (x1 * x1) + self.a[1] * (x2 * x2) + self.a[2] * (x3 * x3)
        return j + self.eta.jet(X) if self.eta is not None else j


class TauField(ScalarField):
    """``tau = -h(a1 x1^2) + a2 x2^2 + a3 x3^2 + eta``."""

    dim = 3

    def __init__(self, a, h: ProfileH, c0, eta=None):
        self.a = np.asarray(a, dtype=float)
        self.h = h
        self.c0 = float(c0)
        self.eta = eta
        self.rho = NormalFormField(a, eta)

    def jet(self, X):
        x1, x2, x3 = Jet.variables(X)
        t = self.a[0] * (x1 * x1)
        hv, d1, d2 = self.h.derivatives(t.v)
        j = -t.apply(hv, d1, d2) + self.a[1] * (x2 * x2) + self.a[2] * (x3 * x3)
        return j + self.eta.jet(X) if self.eta is not None else j

    # sets
    def in_P(self, X):
        X = np.atleast_2d(X)
        a = self.a
        return (a[0] * X[:, 0] ** 2 <= self.c0) & (a[1] * X[:, 1] ** 2 + a[2] * X[:, 2] ** 2 <= 4 * self.c0)

    def sample_P(self, count, rng):
        a, c0 = self.a, self.c0
        x1 = np.sqrt(c0 / a[0]) * (2 * rng.random(count) - 1)
        r = np.sqrt(rng.random(count))
        th = 2 * np.pi * rng.random(count)
        x2 = 2 * np.sqrt(c0 / a[1]) * r * np.cos(th)
        x3 = 2 * np.sqrt(c0 / a[2]) * r * np.sin(th)
        return np.stack([x1, x2, x3], axis=1)

    def sample_E(self, count, rng):
        x1 = np.sqrt(self.c0 / self.a[0]) * (2 * rng.random(count) - 1)
        return np.stack([x1, np.zeros(count), np.zeros(count)], axis=1)

    def box(self):
        a, c0 = self.a, self.c0
        return np.array([2 * np.sqrt(c0 / a[0]), 4 * np.sqrt(c0 / a[1]), 4 * np.sqrt(c0 / a[2])])

    def sample_band(self, count, rng, lo=None, hi=None, batch=65536):
        """Rejection samples of ``{lo < rho < hi}`` inside :meth:`box`."""
        lo = -self.c0 if lo is None else lo
        hi = 3 * self.c0 if hi is None else hi
        B = self.box()
        out = []
        got = 0
        while got < count:
            X = B * (2 * rng.random((batch, 3)) - 1)
            r = self.rho.value(X)
            X = X[(r > lo) & (r < hi)]
            out.append(X)
            got += len(X)
        return np.vstack(out)[:count]


def tau_function(a, eta=None, c0: float = 0.1, mu: Optional[float] = None, grid: int = 2000) -> TauField:
    """Assemble ``tau`` with ``h = build_h(c0, a2/a1, mu)``; ``mu`` defaults to
    the midpoint of ``(1, a2/a1)``."""
    a = np.asarray(a, dtype=float)
    if not (0 < a[0] < a[1] <= a[2]):
        raise ValueError("need 0 < a1 < a2 <= a3")
    lam = a[1] / a[0]
    mu = 0.5 * (1 + lam) if mu is None else mu
    h = build_h(c0, lam, mu, grid)
    tau = TauField(a, h, c0, eta)
    if eta is not None:
        X = tau.sample_P(2000, np.random.default_rng(7))
        if np.max(np.abs(eta.value(X))) > 1e-12:
            raise ValueError("eta must vanish on P_c0")
    return tau


def validate_tau(tau: TauField, p_samples: int = 10_000, band_samples: int = 100_000, seed: int = 0,
                 tol: float = 1e-10) -> dict:
    """Sampled checks of the sublevel inclusions, the affine relation off
    ``P_c0``, gradient positivity on ``{0 < tau <= 2 c0}`` and strong
    2-plurisubharmonicity on ``P_c0``."""
    rng = np.random.default_rng(seed)
    c0, t0, t1 = tau.c0, tau.h.t0, tau.h.t1
    out = {"c0": c0, "t0": t0, "t1": t1, "lambda": tau.h.lam, "mu": tau.h.mu}

    P = tau.sample_P(p_samples, rng)
    es = eigen_sums(tau.hessian(P), 2)
    k = int(np.argmin(es))
    out["psh_on_P"] = {"samples": p_samples, "margin": float(es[k]), "passed": bool(es[k] > 0),
                       "worst_point": P[k].tolist()}

    band = tau.sample_band(band_samples, rng)
    low = tau.sample_band(band_samples // 10, rng, lo=-4 * c0, hi=-c0)
    E = tau.sample_E(1000, rng)
    X = np.vstack([band, low, E])
    onE = np.zeros(len(X), dtype=bool)
    onE[-len(E):] = True
    r = tau.rho.value(X)
    v, g, _ = tau.evaluate(X)

    def check(name, bad):
        idx = np.flatnonzero(bad)
        out[name] = {"violations": int(len(idx)), "passed": bool(len(idx) == 0),
                     "witness": X[idx[0]].tolist() if len(idx) else None}

    check("a_lower", ((r <= -c0) | onE) & (v > tol))
    check("a_upper", (v <= 0) & ~((r <= -t0 + tol) | onE))
    check("b_lower", (r <= c0) & (v > 2 * c0 + tol))
    check("b_upper", (v <= 2 * c0) & ~(r < 3 * c0))
    offP = ~tau.in_P(X)
    check("c_affine_off_P", offP & (np.abs(v - r - t1) > tol))
    out["c_affine_off_P"]["checked"] = int(offP.sum())
    sel = (v > 0) & (v <= 2 * c0)
    gn = np.linalg.norm(g, axis=1)
    check("d_no_critical", sel & (gn <= 1e-6))
    out["d_no_critical"]["checked"] = int(sel.sum())
    out["d_no_critical"]["min_grad"] = float(gn[sel].min()) if np.any(sel) else None
    out["band_samples"] = int(len(band))
    out["profile"] = tau.h.checks
    keys = ["psh_on_P", "a_lower", "a_upper", "b_lower", "b_upper", "c_affine_off_P", "d_no_critical"]
    out["passed"] = bool(all(out[k]["passed"] for k in keys) and tau.h.checks.get("passed", False))
    return out
