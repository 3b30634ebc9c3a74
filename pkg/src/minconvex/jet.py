"""Second-order forward-mode differentiation on batches of points.

A :class:`Jet` carries the value, gradient and Hessian of a scalar function
at ``m`` points of ``R^n`` simultaneously (shapes ``(m,)``, ``(m, n)`` and
``(m, n, n)``).  Arithmetic on jets propagates all three exactly, so any
composition of the supported primitives yields exact second derivatives.
"""

from __future__ import annotations

import numpy as np


class FieldDomainError(ValueError):
    """Raised when a field is evaluated outside its domain of smoothness."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class Jet:
    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h):
        self.v = v
        self.g = g
        self.h = h

    @property
    def m(self):
        return self.v.shape[0]

    @property
    def n(self):
        return self.g.shape[1]

    @classmethod
    def variables(cls, x):
        """Coordinate jets for points ``x`` of shape ``(m, n)``."""
        x = np.asarray(x, dtype=float)
        m, n = x.shape
        eye = np.eye(n)
        return [
            cls(x[:, k].copy(), np.broadcast_to(eye[k], (m, n)).copy(), np.zeros((m, n, n)))
            for k in range(n)
        ]

    @classmethod
    def constant(cls, c, m, n):
        return cls(np.full(m, float(c)), np.zeros((m, n)), np.zeros((m, n, n)))

    # -- chain rule -------------------------------------------------------
    def apply(self, f0, f1, f2):
        """Compose with a scalar profile given its value and two derivatives
        already evaluated at ``self.v``."""
        g = f1[:, None] * self.g
        h = f1[:, None, None] * self.h + f2[:, None, None] * np.einsum("mi,mj->mij", self.g, self.g)
        return Jet(f0, g, h)

    # -- arithmetic -------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.m, self.n)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v + other, self.g, self.h)
        return Jet(self.v + other.v, self.g + other.g, self.h + other.h)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.g, -self.h)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = float(other)
            return Jet(c * self.v, c * self.g, c * self.h)
        v = self.v * other.v
        g = self.v[:, None] * other.g + other.v[:, None] * self.g
        cross = np.einsum("mi,mj->mij", self.g, other.g)
        h = (
            self.v[:, None, None] * other.h
            + other.v[:, None, None] * self.h
            + cross
            + cross.transpose(0, 2, 1)
        )
        return Jet(v, g, h)

    __rmul__ = __mul__

    def reciprocal(self):
        if np.any(self.v == 0.0):
            raise FieldDomainError("division by zero", np.flatnonzero(self.v == 0.0))
        r = 1.0 / self.v
        return self.apply(r, -(r**2), 2.0 * r**3)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            if float(other) == 0.0:
                raise FieldDomainError("division by zero")
            return self * (1.0 / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, other):
        if isinstance(other, Jet):
            return exp(other * log(self))
        p = float(other)
        if p == 0.0:
            return Jet.constant(1.0, self.m, self.n)
        if p == 1.0:
            return self
        if p.is_integer():
            if p < 0 and np.any(self.v == 0.0):
                raise FieldDomainError("negative power of zero", np.flatnonzero(self.v == 0.0))
            return self.apply(self.v**p, p * self.v ** (p - 1), p * (p - 1) * self.v ** (p - 2))
        if np.any(self.v <= 0.0):
            raise FieldDomainError("non-integer power of a non-positive base", np.flatnonzero(self.v <= 0.0))
        return self.apply(self.v**p, p * self.v ** (p - 1), p * (p - 1) * self.v ** (p - 2))

    def __rpow__(self, other):
        base = float(other)
        if base <= 0.0:
            raise FieldDomainError("power with non-positive constant base")
        return exp(self * np.log(base))


def exp(a):
    e = np.exp(a.v)
    return a.apply(e, e, e)


def log(a):
    bad = a.v <= 0.0
    if np.any(bad):
        raise FieldDomainError("log of a non-positive value", np.flatnonzero(bad))
    r = 1.0 / a.v
    return a.apply(np.log(a.v), r, -(r**2))


def sqrt(a):
    bad = a.v <= 0.0
    if np.any(bad):
        raise FieldDomainError("sqrt of a non-positive value", np.flatnonzero(bad))
    s = np.sqrt(a.v)
    return a.apply(s, 0.5 / s, -0.25 / (s * a.v))


def cosh(a):
    return a.apply(np.cosh(a.v), np.sinh(a.v), np.cosh(a.v))


def sinh(a):
    return a.apply(np.sinh(a.v), np.cosh(a.v), np.sinh(a.v))


def sin(a):
    return a.apply(np.sin(a.v), np.cos(a.v), -np.sin(a.v))


def cos(a):
    return a.apply(np.cos(a.v), -np.sin(a.v), -np.cos(a.v))


def absolute(a):
    # smooth only away from the origin
    bad = a.v == 0.0
    if np.any(bad):
        raise FieldDomainError("abs is not differentiable at 0", np.flatnonzero(bad))
    s = np.sign(a.v)
    return a.apply(np.abs(a.v), s, np.zeros_like(a.v))


FUNCTIONS = {
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "cosh": cosh,
    "sinh": sinh,
    "sin": sin,
    "cos": cos,
    "abs": absolute,
}
