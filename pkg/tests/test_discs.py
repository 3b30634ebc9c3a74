import numpy as np
import pytest

from minconvex.discs import (
    BranchCollisionError,
    CriticalPointError,
    Laurent,
    Loop,
    OpenCurveError,
    catenoid_weierstrass,
    disc_mesh,
    disc_metrics,
    flux,
    from_weierstrass,
    growth_constant,
    m_disc,
    null_directions_in_plane,
    ray_consistency,
    sigma_surface,
)
from minconvex.fields import parse_field
from minconvex.psh import is_null_vector, levi_form_matrix

NORM2 = "x1^2+x2^2+x3^2"
SADDLE = "-x1^2+2*x2^2+3*x3^2"


def test_flat_weierstrass_disc():
    F = from_weierstrass(1.0, 0.0)
    t = np.linspace(0, 2 * np.pi, 9)
    B = F.real(np.exp(1j * t))
    np.testing.assert_allclose(B, np.stack([np.cos(t) / 2, -np.sin(t) / 2, 0 * t], axis=1), atol=1e-15)
    np.testing.assert_allclose(F.real(0.0), [0, 0, 0])


def test_constant_disc_is_flagged():
    assert not from_weierstrass(0.0, 1.0).immersive
    assert from_weierstrass(1.0, 0.0).immersive


def test_weierstrass_nullity_exact(rng):
    F = from_weierstrass(rng.normal(size=4) + 1j * rng.normal(size=4), rng.normal(size=3) + 1j * rng.normal(size=3),
                         center=(1.0, -2.0, 0.5))
    Z = np.sqrt(rng.random(10_000)) * np.exp(2j * np.pi * rng.random(10_000))
    D = F.derivative(Z)
    scale = np.sum(np.abs(D) ** 2, axis=1)
    assert np.max(np.abs(np.sum(D * D, axis=1)) / scale) < 1e-13
    np.testing.assert_allclose(F.real(0.0), [1.0, -2.0, 0.5])
    assert np.max(F.conformality_residual(Z[:200])) < 1e-8
    lap1 = F.laplacian_residual(0.5 * Z[:200], h=1e-3)
    lap2 = F.laplacian_residual(0.5 * Z[:200], h=5e-4)
    assert lap1 < 1e-4 and lap1 / lap2 > 3.0


def test_structural_nullity():
    F = from_weierstrass(2.0, 1j)
    w = F.derivative(np.array([0.3 + 0.1j]))[0]
    assert abs(np.sum(w * w)) < 1e-15


def test_catenoid_piece_is_conformal_minimal():
    F = catenoid_weierstrass()
    Z = F.sample_points(8, 32)
    assert np.max(F.conformality_residual(Z)) < 1e-10
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    for rho in (0.6, 1.0, 1.7):
        X = F.real(rho * np.exp(1j * t))
        axis = X.mean(axis=0)
        np.testing.assert_allclose(X[:, 2], np.log(rho) + 0 * t, atol=1e-12)
        np.testing.assert_allclose(np.hypot(X[:, 0] - axis[0], X[:, 1] - axis[1]), np.cosh(np.log(rho)), rtol=1e-12)


def test_disc_flux_vanishes(rng):
    F = from_weierstrass(rng.normal(size=3), rng.normal(size=3))
    np.testing.assert_allclose(flux(F, Loop.circle(0.7)), 0.0, atol=1e-8)
    np.testing.assert_allclose(flux(F, Loop.circle(0.2, center=0.3 + 0.2j)), 0.0, atol=1e-8)


def test_catenoid_vertical_flux():
    F = catenoid_weierstrass()
    np.testing.assert_allclose(flux(F, Loop.circle(1.0)), [0.0, 0.0, np.pi], atol=1e-8)


@pytest.mark.parametrize("r1,r2", [(0.6, 1.9), (0.8, 1.25)])
def test_flux_homology_invariance(r1, r2):
    F = catenoid_weierstrass()
    np.testing.assert_allclose(flux(F, Loop.circle(r1)), flux(F, Loop.circle(r2)), atol=1e-8)


def test_flux_sampled_loops():
    F = catenoid_weierstrass()
    z = np.exp(1j * np.linspace(0, 2 * np.pi, 4001))
    np.testing.assert_allclose(flux(F, z), [0.0, 0.0, np.pi], atol=1e-6)
    with pytest.raises(OpenCurveError):
        flux(F, z[:-10])


def test_laurent_arithmetic():
    p = Laurent([1, 2]) * Laurent({-1: 3})
    assert p.c == {-1: 3, 0: 6}
    assert Laurent([0, 0, 1]).derivative().c == {1: 2}
    assert (Laurent([1]) - 1).is_zero


@pytest.mark.parametrize(
    "a,expected",
    [((1.0, 0.0, 0.0), [(0, 1, 1j), (0, 1, -1j)]), ((0.0, 0.0, 1.0), [(1, 1j, 0), (1, -1j, 0)])],
)
def test_null_directions_axes(a, expected):
    l1, l2, gap = null_directions_in_plane(np.array(a))
    got = {tuple(np.round(v / v[np.argmax(np.abs(v))], 12)) for v in (l1, l2)}
    want = {tuple(np.round(np.array(e, complex) / np.array(e, complex)[np.argmax(np.abs(e))], 12)) for e in expected}
    assert got == want
    assert gap > 0.1


def test_null_directions_generic():
    a = np.array([1.0, 1.0, 1.0])
    l1, l2, gap = null_directions_in_plane(a)
    for l in (l1, l2):
        assert is_null_vector(l, 1e-12)
        assert abs(a @ l) < 1e-12
    assert gap > 0.1
    assert np.linalg.norm(np.cross(l1, l2)) > 0.1


def test_null_directions_rejects_zero():
    with pytest.raises(CriticalPointError):
        null_directions_in_plane(np.zeros(3))


def test_sigma_surface_coefficients():
    S = sigma_surface(parse_field(NORM2, 3), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(S.a, [2, 0, 0])
    np.testing.assert_allclose(S.c, 0.5 * np.eye(3))
    S = sigma_surface(parse_field(SADDLE, 3), [0.0, 1.0, 0.0])
    np.testing.assert_allclose(S.a, [0, 4, 0])
    np.testing.assert_allclose(S.c, np.diag([-0.5, 1.0, 1.5]))
    with pytest.raises(CriticalPointError):
        sigma_surface(parse_field(NORM2, 3), [0.0, 0.0, 0.0])


@pytest.mark.parametrize("r", [0.1, 0.05])
def test_growth_constant_norm(r):
    d = m_disc(parse_field(NORM2, 3), [1.0, 0.0, 0.0], r, 1, 100)
    assert d.diagnostics["growth_constant"] == pytest.approx(1.0, rel=0.02)
    assert d.diagnostics["quadric_residual"] < 1e-6
    assert d.diagnostics["nullity_residual"] < 1e-6


def test_growth_stable_in_radius():
    rho = parse_field(SADDLE, 3)
    c = [m_disc(rho, [0.0, 1.0, 0.0], r, 1, 100).diagnostics["growth_constant"] for r in (0.1, 0.05)]
    assert abs(c[0] - c[1]) <= 0.02 * abs(c[1])


@pytest.mark.parametrize("branch", [1, 2])
def test_saddle_branches_match_levi(branch):
    d = m_disc(parse_field(SADDLE, 3), [0.0, 1.0, 0.0], 0.05, branch, 50)
    c, levi = d.diagnostics["growth_constant"], d.diagnostics["levi_on_branch"]
    assert c > 0
    assert c == pytest.approx(levi, rel=0.05)


def test_linear_field_flags_hypothesis():
    d = m_disc(parse_field("x1+2*x2-x3", 3), [0.3, 0.0, 0.0], 0.05, 1, 20)
    assert d.diagnostics["growth_constant"] <= 1e-12
    assert not d.diagnostics["growth_hypothesis_ok"]


def test_m_disc_errors():
    with pytest.raises(CriticalPointError):
        m_disc(parse_field(NORM2, 3), [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        m_disc(parse_field(NORM2, 3), [1.0, 0.0, 0.0], branch=3)


def test_sampled_rays_are_conformal_and_consistent():
    steps, r = 50, 0.05
    h = r / steps
    d = m_disc(parse_field("x1^2+2*x2^2+x3^2+x1*x3", 3), [1.0, 0.5, 0.0], r, 1, steps)
    TH = d.theta
    u, v = TH.real, TH.imag
    conf = np.max(np.abs(np.sum(u * v, axis=-1)) + np.abs(np.sum(u * u - v * v, axis=-1)))
    assert conf < 10 * h**3
    i = steps // 2
    delta = 2 * np.pi / len(d.phis)
    bound = h**3 + delta * d.radii[i] ** 2
    assert max(ray_consistency(d, k, i) for k in range(len(d.phis))) < bound


def test_disc_metrics():
    for s in (0.5, 2.0):
        assert disc_metrics(from_weierstrass(2 * s, 0.0))["intrinsic_radius"] == pytest.approx(s)
    m = disc_metrics(from_weierstrass(1.0, 0.0))
    assert m["factor_min"] == pytest.approx(m["factor_max"])
    cat = disc_metrics(catenoid_weierstrass(0.5, 2.0), nr=30)
    r = np.array(cat["radii"])
    np.testing.assert_allclose(np.array(cat["factor_profile"]) * r, np.cosh(np.log(r)), rtol=1e-10)
    prof = np.array(cat["factor_profile"]) * r
    order = np.argsort(np.abs(np.log(r)))
    assert np.all(np.diff(prof[order]) >= -1e-12)


def test_ray_disc_metrics_and_mesh():
    d = m_disc(parse_field(NORM2, 3), [1.0, 0.0, 0.0], 0.1, 1, 40, rays=16)
    m = disc_metrics(d)
    assert m["intrinsic_radius"] == pytest.approx(0.1, rel=1e-6)
    V, F = disc_mesh(d)
    assert V.shape[1] == 3 and F.max() < len(V)


def test_growth_constant_fit_exact_on_norm():
    rho = parse_field(NORM2, 3)
    d = m_disc(rho, [1.0, 0.0, 0.0], 0.1, 2, 50)
    c, spread = growth_constant(rho, d, 0.1)
    assert c == pytest.approx(levi_form_matrix(2 * np.eye(3), np.array([0, 1, 1j])), rel=0.02)
    assert spread < 0.05
