"""Sampled certification of p-plurisubharmonic and null plurisubharmonic fields.

A "holds" verdict is a certificate over the sampled points only; every verdict
reports the sample count and the smallest margin seen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fields import FieldDomainError, ScalarField, SymmetricForm

DEFAULT_TOL = 1e-9


class EmptyRegionError(ValueError):
    pass


class SampleEvaluationError(RuntimeError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


def _matrix(H):
    return H.matrix if isinstance(H, SymmetricForm) else np.asarray(H, dtype=float)


def eigen_sum(H, p: int) -> float:
    """Sum of the ``p`` smallest eigenvalues of a symmetric form."""
    A = _matrix(H)
    n = A.shape[-1]
    if not 1 <= p <= n:
        raise ValueError(f"p must lie in 1..{n}, got {p}")
    lam = H.eigenvalues if isinstance(H, SymmetricForm) else np.linalg.eigvalsh(A)
    return float(np.sum(lam[:p]))


def eigen_sums(Hs, p: int) -> np.ndarray:
    """Vectorized :func:`eigen_sum` over a stack of matrices ``(m, n, n)``."""
    Hs = np.asarray(Hs, dtype=float)
    n = Hs.shape[-1]
    if not 1 <= p <= n:
        raise ValueError(f"p must lie in 1..{n}, got {p}")
    lam = np.linalg.eigvalsh(0.5 * (Hs + np.swapaxes(Hs, -1, -2)))
    return lam[..., :p].sum(axis=-1)


def trace_on_plane(H, basis, atol: float = 1e-10) -> float:
    """Trace of ``H`` restricted to the span of an orthonormal ``basis``."""
    A = _matrix(H)
    E = np.atleast_2d(np.asarray(basis, dtype=float))
    if E.shape[1] != A.shape[0]:
        raise ValueError("basis vectors have the wrong dimension")
    gram = E @ E.T
    if np.max(np.abs(gram - np.eye(len(E)))) > atol:
        raise ValueError("basis is not orthonormal")
    return float(np.einsum("ki,ij,kj->", E, A, E))


# -- regions ----------------------------------------------------------------


class BoxRegion:
    """Axis-aligned box sampled uniformly with a fixed seed."""

    def __init__(self, lo, hi, dim: int):
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,)).copy()
        self.dim = dim
        if np.any(self.hi < self.lo):
            raise EmptyRegionError("box has hi < lo")

    def sample(self, count, rng):
        return self.lo + (self.hi - self.lo) * rng.random((count, self.dim))

    def describe(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class PointSet:
    """A fixed list of sample points."""

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.dim = self.points.shape[1]

    def sample(self, count, rng):
        return self.points

    def describe(self):
        return {"kind": "points", "count": int(len(self.points))}


def parse_region(text: str, dim: int):
    """Parse ``box:lo,hi`` (scalar bounds shared by all coordinates)."""
    kind, _, rest = text.partition(":")
    if kind != "box":
        raise ValueError(f"unknown region kind {kind!r}")
    try:
        lo, hi = (float(t) for t in rest.split(","))
    except ValueError as exc:
        raise ValueError(f"malformed box region {text!r}") from exc
    return BoxRegion(lo, hi, dim)


def _points(region, samples, seed):
    rng = np.random.default_rng(seed)
    X = region.sample(samples, rng) if hasattr(region, "sample") else np.atleast_2d(region)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.size == 0 or len(X) == 0:
        raise EmptyRegionError("region produced no sample points")
    return X


def _hessians(f: ScalarField, X):
    try:
        return f.hessian(X)
    except FieldDomainError as exc:
        idx = exc.points[0] if exc.points is not None and len(exc.points) else None
        pt = X[idx].tolist() if idx is not None else None
        raise SampleEvaluationError(f"field evaluation failed: {exc}", pt) from exc


# -- verdicts ---------------------------------------------------------------


@dataclass
class PshVerdict:
    mode: str
    p: int
    result: str
    margin: float
    samples: int
    witness: Optional[dict] = None
    kind: str = "p-psh"
    note: str = "sampled certificate over the listed points, not a proof"
    extra: dict = field(default_factory=dict)

    @property
    def holds(self):
        return self.result == "holds"

    def to_dict(self):
        d = {
            "kind": self.kind,
            "mode": self.mode,
            "p": self.p,
            "result": self.result,
            "margin": float(self.margin),
            "samples": int(self.samples),
            "witness": self.witness,
            "note": self.note,
        }
        d.update(self.extra)
        return d


def decide(margin: float, mode: str, tol: float) -> str:
    if mode == "weak":
        return "holds" if margin >= -tol else "fails"
    if mode == "strong":
        if margin > tol:
            return "holds"
        if margin < -tol:
            return "fails"
        return "inconclusive"
    raise ValueError(f"mode must be weak or strong, got {mode!r}")


def verdict_from_values(values, X, p, mode, tol, kind="p-psh", directions=None):
    values = np.asarray(values, dtype=float)
    k = int(np.argmin(values))
    margin = float(values[k])
    result = decide(margin, mode, tol)
    witness = None
    if result != "holds":
        witness = {"point": X[k].tolist(), "value": margin}
        if directions is not None:
            w = directions[k]
            witness["direction"] = {"re": np.real(w).tolist(), "im": np.imag(w).tolist()}
    return PshVerdict(mode, p, result, margin, len(values), witness, kind)


def check_p_psh(f: ScalarField, region, p: int, mode: str = "weak", tol: float = DEFAULT_TOL,
                samples: int = 1000, seed: int = 0) -> PshVerdict:
    """Test ``lambda_1 + ... + lambda_p >= 0`` of the Hessian over sampled points."""
    if not 1 <= p <= f.dim:
        raise ValueError(f"p must lie in 1..{f.dim}, got {p}")
    X = _points(region, samples, seed)
    H = _hessians(f, X)
    return verdict_from_values(eigen_sums(H, p), X, p, mode, tol)


# -- Levi form and the null quadric -----------------------------------------


def levi_form_matrix(B, w) -> float:
    """``1/4 sum b_jk w_j conj(w_k)`` for a real symmetric ``B``."""
    w = np.asarray(w, dtype=complex)
    return float(np.real(w @ _matrix(B) @ np.conj(w))) / 4.0


def levi_form(f: ScalarField, x, w) -> float:
    """Levi form of the tube extension of ``f`` at ``x`` in direction ``w``.

    For a field independent of the imaginary coordinates the complex Hessian
    entries are a quarter of the real Hessian entries.
    """
    return levi_form_matrix(f.hessian(np.asarray(x, dtype=float)), w)


def is_null_vector(w, tol: float = 1e-10) -> bool:
    w = np.asarray(w, dtype=complex)
    norm2 = float(np.vdot(w, w).real)
    return bool(abs(np.sum(w * w)) <= tol * max(norm2, 1.0))


def null_vector(g) -> np.ndarray:
    """Point of the null quadric in C^3 over ``g`` in the extended plane.

    ``g = inf`` maps to the limiting direction ``(-1, i, 0)/2``.
    """
    if g is None or (np.isscalar(g) and np.isinf(abs(g))):
        return np.array([-0.5, 0.5j, 0.0])
    g = complex(g)
    return np.array([(1 - g * g) / 2, 1j * (1 + g * g) / 2, g])


def normalize_null(w):
    """Scale ``w`` so that its real and imaginary parts both have unit length."""
    w = np.asarray(w, dtype=complex)
    return w * (np.sqrt(2.0) / np.linalg.norm(w, axis=-1, keepdims=True))


def _null_from_normals(N):
    # plane orthogonal to N; flip N into the lower hemisphere so g stays finite
    N = np.where(N[:, 2:3] > 0, -N, N)
    g = (N[:, 0] + 1j * N[:, 1]) / (1 - N[:, 2])
    W = np.stack([(1 - g * g) / 2, 1j * (1 + g * g) / 2, g], axis=1)
    return normalize_null(W)


def _fibonacci_sphere(k):
    i = np.arange(k) + 0.5
    z = 1 - 2 * i / k
    r = np.sqrt(1 - z * z)
    phi = np.pi * (1 + 5**0.5) * i
    pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return np.vstack([pts, [[0, 0, 1.0], [0, 0, -1.0]]])


def _levi4(H, W):
    # sum b_jk w_j conj(w_k) for stacks: H (m,n,n), W (m,k,n) -> (m,k)
    return np.real(np.einsum("mki,mij,mkj->mk", W, H, np.conj(W)))


def null_margins(H, grid: int = 200, iters: int = 60):
    """Minimum of ``sum b w conj(w)`` over normalized null ``w`` (n = 3).

    Null vectors come from the rational parametrization over a Fibonacci grid
    of the sphere (via stereographic projection), followed by a shrinking
    pattern search.  Returns the minima and the minimizing directions.
    """
    H = np.asarray(H, dtype=float)
    m = H.shape[0]
    S = _fibonacci_sphere(grid)
    W = _null_from_normals(S)
    vals = _levi4(H, np.broadcast_to(W, (m,) + W.shape))
    k = np.argmin(vals, axis=1)
    N = S[k].copy()
    best = vals[np.arange(m), k]
    step = np.full(m, 0.3)
    for _ in range(iters):
        a = np.where(np.abs(N[:, 0:1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
        t1 = np.cross(N, a)
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = np.cross(N, t1)
        improved = np.zeros(m, dtype=bool)
        for d in (t1, -t1, t2, -t2):
            C = N + step[:, None] * d
            C /= np.linalg.norm(C, axis=1, keepdims=True)
            v = _levi4(H, _null_from_normals(C)[:, None, :])[:, 0]
            better = v < best
            N[better] = C[better]
            best[better] = v[better]
            improved |= better
        step = np.where(improved, step, step * 0.5)
    return best, _null_from_normals(N)


def null_margins_stiefel(H, rng, starts: int = 4, squarings: int = 3, iters: int = 400):
    """Same minimum in any dimension via random orthonormal pairs ``(u, v)``.

    Each pair is pushed toward the minimizing plane by orthogonalized
    iteration with a power of ``sigma I - H``, then ``u.Hu + v.Hv`` is
    evaluated.
    """
    H = np.asarray(H, dtype=float)
    m, n, _ = H.shape
    sigma = np.abs(H).sum(axis=2).max(axis=1) + 1.0
    M = sigma[:, None, None] * np.eye(n) - H
    for _ in range(squarings):
        M = M @ M
        M /= np.abs(M).max(axis=(1, 2), keepdims=True)
    best = np.full(m, np.inf)
    best_w = np.zeros((m, n), dtype=complex)
    for _ in range(starts):
        U, _r = np.linalg.qr(rng.standard_normal((m, n, 2)))
        for _ in range(iters):
            U, _r = np.linalg.qr(M @ U)
        val = np.einsum("mik,mij,mjk->m", U, H, U)
        better = val < best
        best[better] = val[better]
        best_w[better] = U[better, :, 0] + 1j * U[better, :, 1]
    return best, best_w


def check_null_psh(f: ScalarField, region, mode: str = "weak", tol: float = DEFAULT_TOL,
                   samples: int = 1000, seed: int = 0) -> PshVerdict:
    """Test the Levi form of the tube extension on sampled null directions."""
    X = _points(region, samples, seed)
    H = _hessians(f, X)
    if f.dim == 3:
        vals, W = null_margins(H)
    else:
        vals, W = null_margins_stiefel(H, np.random.default_rng(seed + 1))
    v = verdict_from_values(vals, X, 2, mode, tol, kind="null-psh", directions=W)
    return v
