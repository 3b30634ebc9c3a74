import numpy as np
import pytest

from minconvex.fields import parse_field, quadratic_field
from minconvex.morse import (
    DegenerateCriticalPointError,
    NotCriticalError,
    build_h,
    make_nice,
    tau_function,
    validate_tau,
)
from minconvex.psh import eigen_sums

QUARTIC = "-x1^2+2*x2^2+3*x3^2+x1^4"


def test_make_nice_keeps_quadratics():
    rho = quadratic_field([-1.0, 2.0, 3.0])
    out, rep = make_nice(rho, np.zeros(3), 0.1)
    assert out is rho and rep["unchanged"]


def test_make_nice_regions(rng):
    rho = parse_field(QUARTIC, 3)
    nice, rep = make_nice(rho, np.zeros(3), 0.1)
    assert not rep["unchanged"]
    d = rng.normal(size=(500, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    inner = d * 0.1 * rng.random(500)[:, None]
    Q = quadratic_field([-1.0, 2.0, 3.0])
    for a, b in zip(nice.evaluate(inner), Q.evaluate(inner)):
        np.testing.assert_allclose(a, b, atol=1e-14)
    outer = d * (0.2 + rng.random(500))[:, None]
    for a, b in zip(nice.evaluate(outer), rho.evaluate(outer)):
        np.testing.assert_allclose(a, b, atol=1e-14)


def test_make_nice_c2_distance_scales_quadratically():
    # eta = x1^4, so the C^2 distance on the shell is a fixed multiple of eps^2
    d = {eps: make_nice(parse_field(QUARTIC, 3), np.zeros(3), eps)[1]["c2_distance"] for eps in (0.2, 0.05, 0.005)}
    assert d[0.2] / 0.2**2 == pytest.approx(d[0.005] / 0.005**2, rel=1e-6)
    assert d[0.005] < 0.005


def test_make_nice_errors():
    with pytest.raises(NotCriticalError):
        make_nice(parse_field(QUARTIC, 3), [1.0, 0.0, 0.0], 0.1)
    with pytest.raises(DegenerateCriticalPointError):
        make_nice(parse_field("x1^2+x2^2+x3^4", 3), np.zeros(3), 0.1)


def test_t0_formula():
    assert build_h(1.0, 2.0, 1.5).t0 == pytest.approx(1 / 9)


@pytest.mark.parametrize("c0,lam,mu", [(1.0, 2.0, 1.5), (0.1, 2.0, 1.5), (0.5, 3.0, 1.2), (2.0, 1.5, 1.25)])
def test_profile_invariants(c0, lam, mu):
    h = build_h(c0, lam, mu)
    rep = h.verify(points=2000)
    assert rep["passed"], rep
    assert h.t0 < h.t1 < c0
    assert h(np.array([h.t0]))[0] == pytest.approx(0.0, abs=1e-15)
    assert h(np.array([c0]))[0] == pytest.approx(c0 - h.t1, abs=1e-12)
    # affine tail keeps condition (iv) analytically
    t = np.array([c0, 2 * c0, 100 * c0])
    vals, d1, d2 = h.derivatives(t)
    np.testing.assert_allclose(d1, 1.0)
    np.testing.assert_allclose(d2, 0.0)


def test_profile_derivatives_consistent():
    h = build_h(1.0, 2.0, 1.5)
    t = np.linspace(0.12, 0.98, 200)
    e = 1e-6
    v, d1, d2 = h.derivatives(t)
    fd1 = (h(t + e) - h(t - e)) / (2 * e)
    fd2 = (h.derivatives(t + e)[1] - h.derivatives(t - e)[1]) / (2 * e)
    np.testing.assert_allclose(d1, fd1, atol=1e-8)
    np.testing.assert_allclose(d2, fd2, atol=1e-7)


@pytest.mark.parametrize("c0,lam,mu", [(1.0, 1.0, 1.5), (1.0, 2.0, 2.5), (1.0, 2.0, 1.0), (0.0, 2.0, 1.5)])
def test_build_h_rejects_bad_parameters(c0, lam, mu):
    with pytest.raises(ValueError):
        build_h(c0, lam, mu)


def test_tau_ordering():
    with pytest.raises(ValueError):
        tau_function((2.0, 1.0, 3.0))


@pytest.fixture(scope="module")
def tau():
    return tau_function((1.0, 2.0, 3.0), c0=1.0, mu=1.5)


def test_tau_psh_on_P(tau):
    P = tau.sample_P(10_000, np.random.default_rng(1))
    assert np.all(tau.in_P(P))
    assert eigen_sums(tau.hessian(P), 2).min() > 0


def test_tau_affine_off_P(tau, rng):
    # the normal form is only prescribed on a neighbourhood, here {rho < 3 c0}
    X = rng.uniform(-3, 3, size=(20_000, 3))
    X = X[tau.rho.value(X) < 3 * tau.c0]
    off = X[~tau.in_P(X)]
    assert len(off) > 1000
    np.testing.assert_allclose(tau.value(off) - tau.rho.value(off), tau.h.t1, atol=1e-10)


def test_tau_nonpositive_on_E(tau, rng):
    x1 = rng.uniform(-1, 1, 200) * np.sqrt(tau.c0 / tau.a[0])
    E = np.stack([x1, 0 * x1, 0 * x1], axis=1)
    assert np.all(tau.value(E) <= 1e-15)


def test_validate_tau_all_checks(tau):
    rep = validate_tau(tau, p_samples=2000, band_samples=20_000)
    assert rep["passed"]
    for key in ("a_lower", "a_upper", "b_lower", "b_upper", "c_affine_off_P", "d_no_critical"):
        assert rep[key]["violations"] == 0


def test_eta_must_vanish_on_P():
    with pytest.raises(ValueError):
        tau_function((1.0, 2.0, 3.0), eta=parse_field("x2^2+0.01", 3), c0=1.0, mu=1.5)
