"""Scalar fields on R^n with exact gradients and Hessians."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from .expression import (
    DimensionMismatchError,
    ExpressionError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
    evaluate_jet,
    parse_expression,
    to_string,
)
from .jet import FieldDomainError, Jet

__all__ = [
    "ScalarField",
    "SymmetricForm",
    "ExpressionField",
    "Profile",
    "parse_field",
    "hessian",
    "compose_convex",
    "load_field",
    "catenoid_field",
    "ball_field",
    "slab_field",
    "quadratic_field",
    "FieldDomainError",
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownIdentifierError",
    "DimensionMismatchError",
]


@dataclass(frozen=True, eq=False)
class SymmetricForm:
    """A real symmetric bilinear form; ``eigenvalues`` are ascending."""

    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("symmetric form needs a square matrix")
        object.__setattr__(self, "matrix", 0.5 * (a + a.T))

    @property
    def dim(self):
        return self.matrix.shape[0]

    @cached_property
    def eigh(self):
        return np.linalg.eigh(self.matrix)

    @property
    def eigenvalues(self):
        return self.eigh[0]

    @property
    def eigenvectors(self):
        return self.eigh[1]

    def __call__(self, xi, eta=None):
        xi = np.asarray(xi)
        eta = xi if eta is None else np.asarray(eta)
        return xi @ self.matrix @ eta

    def quad(self, xi):
        """Quadratic action ``H(xi, xi)``."""
        return self(xi)


def _as_batch(x, n):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != n:
        raise DimensionMismatchError(f"expected points in R^{n}, got shape {x.shape}")
    return X, single


class ScalarField:
    """Base class: subclasses implement :meth:`jet` on a batch of points."""

    dim: int

    def jet(self, X) -> Jet:  # pragma: no cover - abstract
        raise NotImplementedError

    def evaluate(self, x):
        X, single = _as_batch(x, self.dim)
        j = self.jet(X)
        bad = ~np.isfinite(j.v)
        if np.any(bad):
            raise FieldDomainError("non-finite field value", np.flatnonzero(bad))
        if single:
            return j.v[0], j.g[0], j.h[0]
        return j.v, j.g, j.h

    def value(self, x):
        return self.evaluate(x)[0]

    def gradient(self, x):
        return self.evaluate(x)[1]

    def hessian(self, x):
        X, single = _as_batch(x, self.dim)
        h = self.evaluate(X)[2]
        h = 0.5 * (h + h.transpose(0, 2, 1))
        return SymmetricForm(h[0]) if single else h

    # field arithmetic, handy for assembling defining functions
    def __add__(self, other):
        return _Combined(self, other, "+")

    def __radd__(self, other):
        return _Combined(self, other, "+")

    def __sub__(self, other):
        return _Combined(self, other, "-")

    def __mul__(self, other):
        return _Combined(self, other, "*")

    __rmul__ = __mul__

    def __neg__(self):
        return _Combined(self, -1.0, "*")


class _Combined(ScalarField):
    def __init__(self, a, b, op):
        self.a, self.b, self.op = a, b, op
        self.dim = a.dim

    def jet(self, X):
        ja = self.a.jet(X)
        jb = self.b.jet(X) if isinstance(self.b, ScalarField) else float(self.b)
        if self.op == "+":
            return ja + jb
        if self.op == "-":
            return ja - jb
        return ja * jb


class JetField(ScalarField):
    """Field defined by a function mapping coordinate jets to a jet."""

    def __init__(self, fn: Callable, dim: int, name: str = "jet-field"):
        self.fn = fn
        self.dim = dim
        self.name = name

    def jet(self, X):
        return self.fn(Jet.variables(X))


class ExpressionField(ScalarField):
    def __init__(self, expr, dim, text=None):
        self.expr = expr
        self.dim = dim
        self.text = text if text is not None else to_string(expr)

    def jet(self, X):
        X = np.asarray(X, dtype=float)
        m, n = X.shape
        with np.errstate(all="ignore"):
            return evaluate_jet(self.expr, Jet.variables(X), m, n)

    def __repr__(self):
        return f"ExpressionField({self.text!r}, dim={self.dim})"


def parse_field(text: str, n: int) -> ExpressionField:
    """Parse an expression over ``x1..xn`` into a field on R^n."""
    if n < 1:
        raise DimensionMismatchError(f"dimension must be positive, got {n}")
    expr = parse_expression(text, n)
    return ExpressionField(expr, n, text)


def hessian(f: ScalarField, x) -> SymmetricForm:
    return f.hessian(np.asarray(x, dtype=float))


# -- profiles and composition -----------------------------------------------


@dataclass(frozen=True)
class Profile:
    """A scalar function with its first two derivatives, vectorized."""

    h: Callable
    dh: Callable
    d2h: Callable
    name: str = "profile"
    domain: tuple = (-np.inf, np.inf)

    def check(self, t):
        lo, hi = self.domain
        bad = (t < lo) | (t > hi)
        if np.any(bad):
            raise FieldDomainError(f"profile {self.name} undefined at some field values", np.flatnonzero(bad))

    def __call__(self, t):
        return self.h(t)


PROFILES = {
    "identity": Profile(lambda t: t, np.ones_like, np.zeros_like, "identity"),
    "square": Profile(lambda t: t * t, lambda t: 2 * t, lambda t: 2 * np.ones_like(t), "square"),
    "exp": Profile(np.exp, np.exp, np.exp, "exp"),
    "log": Profile(np.log, lambda t: 1 / t, lambda t: -1 / t**2, "log", (np.nextafter(0, 1), np.inf)),
    "neglog": Profile(lambda t: -np.log(t), lambda t: -1 / t, lambda t: 1 / t**2, "neglog", (np.nextafter(0, 1), np.inf)),
}


class ComposedField(ScalarField):
    def __init__(self, f, profile):
        self.f = f
        self.profile = profile
        self.dim = f.dim

    def jet(self, X):
        j = self.f.jet(X)
        self.profile.check(j.v)
        p = self.profile
        return j.apply(np.asarray(p.h(j.v), float), np.asarray(p.dh(j.v), float), np.asarray(p.d2h(j.v), float))


def compose_convex(f: ScalarField, h) -> ComposedField:
    """Return ``h o f``; ``h`` is a :class:`Profile` or a named profile."""
    if isinstance(h, str):
        h = PROFILES[h]
    return ComposedField(f, h)


# -- built-in fields with closed-form derivatives ---------------------------


class QuadraticField(ScalarField):
    """``x.A x + b.x + c`` with symmetric ``A``."""

    def __init__(self, A, b=None, c=0.0, name="quadratic"):
        A = np.asarray(A, dtype=float)
        self.A = 0.5 * (A + A.T)
        self.dim = A.shape[0]
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float)
        self.c = float(c)
        self.name = name

    def jet(self, X):
        X = np.asarray(X, dtype=float)
        AX = X @ self.A
        v = np.einsum("mi,mi->m", AX, X) + X @ self.b + self.c
        g = 2 * AX + self.b
        h = np.broadcast_to(2 * self.A, (X.shape[0], self.dim, self.dim)).copy()
        return Jet(v, g, h)


def quadratic_field(diag_or_matrix, b=None, c=0.0):
    A = np.asarray(diag_or_matrix, dtype=float)
    if A.ndim == 1:
        A = np.diag(A)
    return QuadraticField(A, b, c)


def ball_field(r=1.0, center=None, n=3):
    """``|x - center|^2 - r^2``, negative inside the ball."""
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    n = len(center)
    return QuadraticField(np.eye(n), -2 * center, float(center @ center) - r * r, name=f"ball:{r}")


class SlabField(ScalarField):
    """``(x_n - a)(x_n - b)``, negative on the slab ``a < x_n < b``."""

    def __init__(self, a=-1.0, b=1.0, n=3):
        if not a < b:
            raise ValueError("slab needs a < b")
        self.a, self.b, self.dim = float(a), float(b), n

    def jet(self, X):
        X = np.asarray(X, dtype=float)
        m, n = X.shape
        z = X[:, -1]
        v = (z - self.a) * (z - self.b)
        g = np.zeros((m, n))
        g[:, -1] = 2 * z - self.a - self.b
        h = np.zeros((m, n, n))
        h[:, -1, -1] = 2.0
        return Jet(v, g, h)


def slab_field(a=-1.0, b=1.0, n=3):
    return SlabField(a, b, n)


class CatenoidField(ScalarField):
    """``cosh(x3)^2 - x1^2 - x2^2``; the outer domain is where it is negative."""

    dim = 3

    def jet(self, X):
        X = np.asarray(X, dtype=float)
        m = X.shape[0]
        x, y, z = X.T
        c, s = np.cosh(z), np.sinh(z)
        v = c * c - x * x - y * y
        g = np.stack([-2 * x, -2 * y, 2 * s * c], axis=1)
        h = np.zeros((m, 3, 3))
        h[:, 0, 0] = -2.0
        h[:, 1, 1] = -2.0
        h[:, 2, 2] = 2 * np.cosh(2 * z)
        return Jet(v, g, h)


def catenoid_field():
    return CatenoidField()


# -- external formats -------------------------------------------------------


def field_from_json(doc) -> ExpressionField:
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        n = int(doc["dim"])
        text = doc["expr"]
    except (KeyError, TypeError) as exc:
        raise ExpressionError("field document needs 'dim' and 'expr'") from exc
    return parse_field(text, n)


def load_field(spec: str, n: int = 3) -> ScalarField:
    """Resolve a CLI field argument: a JSON file, a built-in tag or an expression."""
    path = Path(spec)
    if spec.endswith(".json") and path.exists():
        return field_from_json(path.read_text())
    if spec == "catenoid":
        return catenoid_field()
    if spec.startswith("ball:"):
        return ball_field(float(spec.split(":", 1)[1]), n=n)
    if spec.startswith("slab:"):
        a, b = (float(t) for t in spec.split(":", 1)[1].split(","))
        return slab_field(a, b, n)
    return parse_field(spec, n)
