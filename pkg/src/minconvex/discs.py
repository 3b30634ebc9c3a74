"""Null holomorphic discs in C^3, their minimal real parts, flux, and the
local families of null discs on the complex hypersurface ``Sigma_x``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fields import ScalarField
from .psh import levi_form_matrix

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class CriticalPointError(ValueError):
    pass


class BranchCollisionError(RuntimeError):
    pass


class ResidualError(RuntimeError):
    pass


class OpenCurveError(ValueError):
    pass


# -- Laurent polynomials ----------------------------------------------------


class Laurent:
    """Finite Laurent series ``sum c_k zeta^k`` stored as ``{k: c_k}``."""

    def __init__(self, coeffs=None):
        if coeffs is None:
            coeffs = {}
        elif not isinstance(coeffs, dict):
            coeffs = {k: c for k, c in enumerate(np.atleast_1d(coeffs))}
        self.c = {int(k): complex(v) for k, v in coeffs.items() if v != 0}

    @classmethod
    def lift(cls, x):
        if isinstance(x, Laurent):
            return x
        if np.isscalar(x):
            return cls({0: x})
        return cls(x)

    def __add__(self, other):
        other = Laurent.lift(other)
        out = dict(self.c)
        for k, v in other.c.items():
            out[k] = out.get(k, 0) + v
        return Laurent(out)

    __radd__ = __add__

    def __neg__(self):
        return Laurent({k: -v for k, v in self.c.items()})

    def __sub__(self, other):
        return self + (-Laurent.lift(other))

    def __rsub__(self, other):
        return Laurent.lift(other) - self

    def __mul__(self, other):
        other = Laurent.lift(other)
        out = {}
        for k1, v1 in self.c.items():
            for k2, v2 in other.c.items():
                out[k1 + k2] = out.get(k1 + k2, 0) + v1 * v2
        return Laurent(out)

    __rmul__ = __mul__

    @property
    def is_zero(self):
        return not self.c

    @property
    def min_power(self):
        return min(self.c) if self.c else 0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for k, v in self.c.items():
            out = out + v * z**k
        return out

    def derivative(self):
        return Laurent({k - 1: k * v for k, v in self.c.items() if k != 0})

    def primitive(self, z):
        """A primitive evaluated at ``z``; the ``1/zeta`` term integrates to the
        principal logarithm."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for k, v in self.c.items():
            out = out + (v * np.log(z) if k == -1 else v * z ** (k + 1) / (k + 1))
        return out


# -- Weierstrass discs ------------------------------------------------------


@dataclass
class WeierstrassDisc:
    """Null curve with ``F' = (f(1-g^2)/2, i f(1+g^2)/2, f g)``.

    The parameter domain is the disc ``|zeta| <= outer`` or, when ``inner > 0``,
    the annulus ``inner <= |zeta| <= outer``.  ``F(base) = center`` where
    ``base`` is 0 for discs and ``inner/outer`` geometric mean for annuli.
    """

    f: Laurent
    g: Laurent
    center: np.ndarray
    inner: float = 0.0
    outer: float = 1.0
    comps: tuple = field(init=False, repr=False)

    def __post_init__(self):
        f, g = self.f, self.g
        g2 = g * g
        self.comps = (0.5 * f * (1 - g2), 0.5j * f * (1 + g2), f * g)
        self.center = np.asarray(self.center, dtype=float)
        if self.inner == 0 and any(c.min_power < 0 for c in self.comps):
            raise ValueError("Laurent data with poles needs an annulus (inner > 0)")

    @property
    def base(self):
        return 0.0 if self.inner == 0 else float(np.sqrt(self.inner * self.outer))

    @property
    def immersive(self):
        return not self.f.is_zero

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return np.stack([c(z) for c in self.comps], axis=-1)

    def __call__(self, z):
        """Complex values ``F(zeta)``; imaginary parts of log terms follow the
        principal branch, real parts are single valued."""
        z = np.asarray(z, dtype=complex)
        b = np.asarray(self.base, dtype=complex)
        return np.stack(
            [c.primitive(z) - c.primitive(b) + self.center[i] for i, c in enumerate(self.comps)], axis=-1
        )

    def real(self, z):
        return np.real(self(z))

    def nullity_residual(self, z):
        d = self.derivative(z)
        num = np.abs(np.sum(d * d, axis=-1))
        den = np.maximum(np.sum(np.abs(d) ** 2, axis=-1), 1e-300)
        return float(np.max(num / den))

    def conformality_residual(self, z):
        d = self.derivative(z)
        ax, ay = np.real(d), -np.imag(d)
        nrm = np.maximum(np.sum(np.abs(d) ** 2, axis=-1), 1e-300)
        r1 = np.abs(np.sum(ax * ax, -1) - np.sum(ay * ay, -1))
        r2 = np.abs(np.sum(ax * ay, -1))
        return float(np.max(np.maximum(r1, r2) / nrm))

    def laplacian_residual(self, z, h=1e-3):
        """Five-point Laplacian of the real part, relative to the value scale."""
        z = np.asarray(z, dtype=complex)
        lap = (self.real(z + h) + self.real(z - h) + self.real(z + 1j * h) + self.real(z - 1j * h)
               - 4 * self.real(z)) / h**2
        return float(np.max(np.abs(lap)))

    def sample_points(self, nr=16, nt=64):
        lo = self.inner if self.inner > 0 else 0.0
        r = np.linspace(lo, self.outer, nr + 1)[1 if lo == 0 else 0 :]
        t = np.linspace(0, 2 * np.pi, nt, endpoint=False)
        return (r[:, None] * np.exp(1j * t)[None, :]).ravel()


def from_weierstrass(f, g, center=(0.0, 0.0, 0.0), inner: float = 0.0, outer: float = 1.0) -> WeierstrassDisc:
    """Null disc from Weierstrass data; ``f, g`` are scalars, coefficient
    sequences (powers 0, 1, ...) or ``{power: coeff}`` dicts."""
    return WeierstrassDisc(Laurent.lift(f), Laurent.lift(g), np.asarray(center, dtype=float), inner, outer)


def catenoid_weierstrass(inner=0.5, outer=2.0):
    """Classical catenoid data ``f = zeta^-2, g = zeta`` on an annulus."""
    return from_weierstrass({-2: 1.0}, {1: 1.0}, (0.0, 0.0, 0.0), inner, outer)


# -- flux -------------------------------------------------------------------


@dataclass
class Loop:
    """Closed parametrized loop ``gamma(t)``, ``t in [0, 2 pi)``."""

    gamma: Callable
    dgamma: Callable
    nodes: int = 256

    @classmethod
    def circle(cls, radius, center=0.0, nodes=256):
        return cls(lambda t: center + radius * np.exp(1j * t), lambda t: 1j * radius * np.exp(1j * t), nodes)


def flux(F, loop, nodes: Optional[int] = None) -> np.ndarray:
    """``Flux(gamma) = integral of Im(dF/2)`` over a closed loop.

    ``loop`` is a :class:`Loop` (periodic trapezoid rule) or an array of
    parameter points whose first and last entries coincide.
    """
    if isinstance(loop, Loop):
        n = nodes or loop.nodes
        t = 2 * np.pi * np.arange(n) / n
        vals = 0.5 * F.derivative(loop.gamma(t)) * loop.dgamma(t)[:, None]
        return np.imag(vals.sum(axis=0)) * (2 * np.pi / n)
    z = np.asarray(loop, dtype=complex)
    if len(z) < 3 or abs(z[0] - z[-1]) > 1e-12:
        raise OpenCurveError("flux needs a closed curve (first point equal to last)")
    d = 0.5 * F.derivative(z)
    dz = np.diff(z)
    return np.imag((0.5 * (d[1:] + d[:-1]) * dz[:, None]).sum(axis=0))


# -- null lines in planes ---------------------------------------------------


def null_lines(N):
    """The two null lines in the complex plane ``{theta : N . theta = 0}``.

    Solves the binary quadratic ``theta . theta = 0`` in a basis of the
    plane.  Returns ``(theta1, theta2, gap)`` with both vectors scaled to
    ``|theta|^2 = 2`` and ``gap = |theta1 ^ theta2| / (|theta1| |theta2|)``.
    """
    N = np.asarray(N, dtype=complex)
    k = int(np.argmax(np.abs(N)))
    if abs(N[k]) == 0:
        raise CriticalPointError("plane normal vanishes")
    others = [i for i in range(3) if i != k]
    E = []
    for i in others:
        e = np.zeros(3, dtype=complex)
        e[i] = 1.0
        e[k] = -N[i] / N[k]
        E.append(e)
    E1, E2 = E
    A, B, C = E1 @ E1, E1 @ E2, E2 @ E2
    disc = np.sqrt(B * B - A * C)
    if abs(A) >= abs(C):
        s1, s2 = (-B + disc) / A, (-B - disc) / A
        t1 = t2 = 1.0
    else:
        t1, t2 = (-B + disc) / C, (-B - disc) / C
        s1 = s2 = 1.0
    th = [s1 * E1 + t1 * E2, s2 * E1 + t2 * E2]
    th = [v * (np.sqrt(2.0) / np.linalg.norm(v)) for v in th]
    ip = abs(np.vdot(th[0], th[1])) / 2.0
    gap = float(np.sqrt(max(1 - ip * ip, 0.0)))
    return th[0], th[1], gap


def _canonical_pair(a):
    """Closed form ``u +- i v`` for a real normal ``a``: ``u`` is the unit
    projection of the coordinate axis least aligned with ``a`` and
    ``v = (a/|a|) x u``."""
    a = np.asarray(a, dtype=float)
    an = a / np.linalg.norm(a)
    k = int(np.argmin(np.abs(an)))
    u = np.eye(3)[k] - an[k] * an
    u /= np.linalg.norm(u)
    v = np.cross(an, u)
    return u + 1j * v, u - 1j * v


def _align_phase(theta, ref):
    """Rotate ``theta`` by a unit phase to best match ``ref``."""
    z = np.vdot(theta, ref)
    return theta * (z / abs(z)) if abs(z) > 0 else theta


def null_directions_in_plane(a, tol: float = 1e-12):
    """Two null lines in ``{sum a_j w_j = 0}`` for real ``a != 0``.

    Lines come from the quadratic solver; branch 1 is the one nearer to
    ``u + i v`` of :func:`_canonical_pair` and each vector is phase-aligned
    with that reference, so ``a = e1`` gives ``(0, 1, +-i)``.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (3,):
        raise ValueError("null lines in a plane are computed in C^3")
    if np.linalg.norm(a) == 0:
        raise CriticalPointError("a = 0 does not define a plane")
    t1, t2, gap = null_lines(a.astype(complex))
    r1, r2 = _canonical_pair(a)
    if abs(np.vdot(t1, r1)) < abs(np.vdot(t2, r1)):
        t1, t2 = t2, t1
    t1, t2 = _align_phase(t1, r1), _align_phase(t2, r2)
    for t in (t1, t2):
        if abs(t @ t) > tol * 2 or abs(a @ t) > tol * max(1.0, np.linalg.norm(a)) * 2:
            raise ResidualError("null line verification failed")
    return t1, t2, gap


# -- Sigma_x and M-discs ----------------------------------------------------


@dataclass
class SigmaSurface:
    """``Sigma_x = {w : a.w + w.C w = 0}`` with ``a = grad rho(x)`` and ``C = Hess rho(x)/4``."""

    x: np.ndarray
    a: np.ndarray
    c: np.ndarray
    rho_x: float

    def defining(self, w):
        w = np.asarray(w, dtype=complex)
        return w @ self.a + np.einsum("...i,ij,...j->...", w, self.c, w)

    def normal(self, w):
        return self.a + 2 * (np.asarray(w, dtype=complex) @ self.c)

    def tangent_residual(self, theta, w=None):
        w = np.zeros(3, dtype=complex) if w is None else w
        return abs(self.normal(w) @ theta)


def sigma_surface(rho: ScalarField, x, crit_tol: float = 1e-12) -> SigmaSurface:
    x = np.asarray(x, dtype=float)
    v, g, H = rho.evaluate(x)
    if np.linalg.norm(g) <= crit_tol:
        raise CriticalPointError(f"critical point of the defining field at {x.tolist()}")
    return SigmaSurface(x, np.asarray(g, dtype=float), 0.25 * H, float(v))


@dataclass
class RayDisc:
    """Null disc sampled on rays ``t e^{i phi}``: ``W[k, i] = w(t_i e^{i phi_k})``."""

    phis: np.ndarray
    radii: np.ndarray
    W: np.ndarray
    theta: np.ndarray  # direction field at the nodes
    center: np.ndarray
    branch: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def zetas(self):
        return self.radii[None, :] * np.exp(1j * self.phis)[:, None]

    @property
    def alpha(self):
        return np.real(self.W)

    def derivative_at_nodes(self):
        return self.theta


def _field_direction(S: SigmaSurface, w, prev, theta0c, norm0, min_gap):
    t1, t2, gap = null_lines(S.normal(w))
    if gap < min_gap:
        raise BranchCollisionError(f"null lines coalesce (gap {gap:.2e})")
    p = prev / np.linalg.norm(prev)
    c1 = abs(np.vdot(p, t1))
    c2 = abs(np.vdot(p, t2))
    t = t1 if c1 >= c2 else t2
    return t * (norm0 / (t @ theta0c)), gap


def m_disc(rho: ScalarField, x, r: float = 0.1, branch: int = 1, steps: int = 100, rays: int = 32,
           tol: float = 1e-6, min_gap: float = 1e-6) -> RayDisc:
    """Null disc through 0 in ``Sigma_x`` tangent to the chosen null line.

    Integrates ``dw/dzeta = theta(w)``, where ``theta(w)`` is the branch-tracked
    null line of ``T_w Sigma_x`` normalized by ``theta . conj(theta0) = |theta0|^2``,
    with classical fourth-order Runge-Kutta along ``rays`` radial rays.
    """
    if branch not in (1, 2):
        raise ValueError("branch must be 1 or 2")
    S = sigma_surface(rho, x)
    lines = null_directions_in_plane(S.a)
    theta0 = lines[branch - 1]
    base_gap = lines[2]
    theta0c = np.conj(theta0)
    norm0 = float(np.real(np.vdot(theta0, theta0)))
    phis = 2 * np.pi * np.arange(rays) / rays
    h = r / steps
    radii = h * np.arange(steps + 1)
    W = np.zeros((rays, steps + 1, 3), dtype=complex)
    TH = np.zeros((rays, steps + 1, 3), dtype=complex)
    min_seen = base_gap
    for k, phi in enumerate(phis):
        e = np.exp(1j * phi)
        w = np.zeros(3, dtype=complex)
        prev = theta0
        TH[k, 0] = theta0
        for i in range(steps):
            k1, g1 = _field_direction(S, w, prev, theta0c, norm0, min_gap)
            k2, g2 = _field_direction(S, w + 0.5 * h * e * k1, k1, theta0c, norm0, min_gap)
            k3, g3 = _field_direction(S, w + 0.5 * h * e * k2, k2, theta0c, norm0, min_gap)
            k4, g4 = _field_direction(S, w + h * e * k3, k3, theta0c, norm0, min_gap)
            w = w + (h * e / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            prev, _ = _field_direction(S, w, k4, theta0c, norm0, min_gap)
            min_seen = min(min_seen, g1, g2, g3, g4)
            W[k, i + 1] = w
            TH[k, i + 1] = prev
    disc = RayDisc(phis, radii, W, TH, S.x, branch)
    quad = float(np.max(np.abs(S.defining(W))))
    null = float(np.max(np.abs(np.sum(TH * TH, axis=-1)) / np.sum(np.abs(TH) ** 2, axis=-1)))
    tangent = float(np.max(np.abs(np.einsum("kij,kij->ki", TH, S.a + 2 * (W @ S.c)))))
    c, spread = growth_constant(rho, disc, r)
    levi = levi_form_matrix(4 * S.c, theta0)
    disc.diagnostics = {
        "quadric_residual": quad,
        "nullity_residual": null,
        "tangency_residual": tangent,
        "min_line_gap": float(min_seen),
        "growth_constant": c,
        "growth_spread": spread,
        "levi_on_branch": levi,
        "theta0": {"re": np.real(theta0).tolist(), "im": np.imag(theta0).tolist()},
        "step": h,
        "growth_hypothesis_ok": bool(c > 0),
    }
    if quad > tol or null > tol:
        raise ResidualError(f"disc residuals exceed tolerance: quadric {quad:.2e}, nullity {null:.2e}")
    return disc


def growth_constant(rho: ScalarField, disc: RayDisc, r: float, inner: float = 0.3):
    """Least-squares ``c`` in ``rho(x + alpha) - rho(x) ~ c |zeta|^2`` over
    ``inner r <= |zeta| <= r``; returns ``(c, max - min of the ratios)``."""
    sel = disc.radii >= inner * r - 1e-15
    Z = disc.zetas[:, sel]
    A = disc.alpha[:, sel]
    pts = disc.center + A.reshape(-1, 3)
    dv = rho.value(pts) - rho.value(disc.center)
    z2 = np.abs(Z.ravel()) ** 2
    c = float(dv @ z2 / (z2 @ z2))
    ratio = dv / z2
    return c, float(ratio.max() - ratio.min())


def ray_consistency(disc: RayDisc, k: int, i: int):
    """Mismatch at ``|zeta| = radii[i]`` between neighbouring rays ``k, k+1``
    after transporting along the chord with the node directions."""
    kk = (k + 1) % len(disc.phis)
    z1 = disc.zetas[k, i]
    z2 = disc.zetas[kk, i]
    w1, w2 = disc.W[k, i], disc.W[kk, i]
    t1, t2 = disc.theta[k, i], disc.theta[kk, i]
    return float(np.linalg.norm(w2 - w1 - 0.5 * (t1 + t2) * (z2 - z1)))


# -- metrics ----------------------------------------------------------------


def disc_metrics(F, nr: int = 32, nt: int = 64) -> dict:
    """Conformal factor ``|F'|/sqrt 2`` on a grid and the intrinsic radius
    (shortest radial length from the center to the outer boundary)."""
    if isinstance(F, RayDisc):
        lam = np.linalg.norm(F.theta, axis=-1) / np.sqrt(2.0)
        lengths = _trapezoid(lam, F.radii, axis=1)
        return {"factor_min": float(lam.min()), "factor_max": float(lam.max()),
                "intrinsic_radius": float(lengths.min())}
    lo = F.inner
    r = np.linspace(lo, F.outer, nr + 1)
    t = np.linspace(0, 2 * np.pi, nt, endpoint=False)
    Z = r[:, None] * np.exp(1j * t)[None, :]
    lam = np.linalg.norm(F.derivative(Z), axis=-1) / np.sqrt(2.0)
    if lo == 0:
        # radial length from 0 by Gauss-Legendre along each ray
        xg, wg = np.polynomial.legendre.leggauss(32)
        s = 0.5 * (xg + 1) * F.outer
        L = np.array([
            np.sum(0.5 * F.outer * wg * np.linalg.norm(F.derivative(s * np.exp(1j * th)), axis=-1)) / np.sqrt(2.0)
            for th in t
        ])
        radius = float(L.min())
    else:
        radius = float("nan")
    return {
        "factor_min": float(lam.min()),
        "factor_max": float(lam.max()),
        "intrinsic_radius": radius,
        "radii": r.tolist(),
        "factor_profile": lam.mean(axis=1).tolist(),
    }


def disc_mesh(disc: RayDisc):
    """Triangle mesh of ``x + alpha`` over the ray grid."""
    rays, nr = disc.W.shape[:2]
    V = [disc.center]
    for k in range(rays):
        for i in range(1, nr):
            V.append(disc.center + np.real(disc.W[k, i]))
    V = np.array(V)
    idx = lambda k, i: 0 if i == 0 else 1 + (k % rays) * (nr - 1) + (i - 1)
    F = []
    for k in range(rays):
        for i in range(nr - 1):
            a, b = idx(k, i), idx(k + 1, i)
            c, d = idx(k, i + 1), idx(k + 1, i + 1)
            if i == 0:
                F.append((0, c, d))
            else:
                F += [(a, c, d), (a, d, b)]
    return V, np.array(F)
