import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minconvex.hulls import (
    GAP_MIN, INSIDE, LP_TOL, OUTSIDE, UNKNOWN, Certificate, HullError, HullProblem, PenaltyField,
    PolyDisc, convex_hull_separation, covered_measure, degree_continuation, flat_disc_seed,
    hull_sweep, inclusion_audit, measure_convergence_check, measure_sequence, minimal_hull_membership,
    null_hull_membership, null_line_seed, optimize_disc, poisson_functional, polynomial_hull_proxy,
    quadratic_certificate, verify_certificate, verify_witness,
)
from minconvex.psh import eigen_sum


class Const:
    def __init__(self, c):
        self.c = c

    def values(self, X):
        return np.full(len(X), self.c)


class SqNorm:
    def values(self, X):
        return np.sum(X ** 2, axis=1)


def rotation(rng):
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


# -- penalty and functional --------------------------------------------------


def test_penalty_profile(unit_circle):
    pen = PenaltyField(unit_circle, 0.04)
    X = np.array([[1.0, 0, 0], [1.06, 0, 0], [1.2, 0, 0], [0, 0, 0]])
    v = pen.values(X)
    assert v[0] == 0.0 and v[2] == 10.0 and v[3] == 10.0
    assert 0 < v[1] < 10


def test_penalty_jet_matches_values(unit_circle, rng):
    pen = PenaltyField(unit_circle, 0.04)
    X = np.array([1.06, 0.0, 0.0]) + 0.005 * rng.normal(size=(20, 3))
    J = pen.jet(X)
    assert np.allclose(J.v, pen.values(X))
    h = 1e-6
    for i in range(3):
        e = np.zeros(3); e[i] = h
        fd = (pen.values(X + e) - pen.values(X - e)) / (2 * h)
        assert np.allclose(J.g[:, i], fd, atol=1e-4)


def test_penalty_box():
    from minconvex.fields import FieldDomainError

    pen = PenaltyField(np.zeros((1, 3)), 0.1, box=(-np.ones(3), np.ones(3)))
    with pytest.raises(FieldDomainError):
        pen.values(np.array([[2.0, 0, 0]]))


@pytest.mark.parametrize("c", [0.0, 1.0, -3.5])
def test_functional_constant(c):
    d = flat_disc_seed(np.zeros(3), [0, 0, 1], 1.0)
    assert poisson_functional(Const(c), d).value == pytest.approx(c)


def test_functional_sq_norm_on_flat_disc():
    d = flat_disc_seed(np.zeros(3), [0, 0, 1], 1.0)
    q = poisson_functional(SqNorm(), d)
    assert q.value == pytest.approx(1.0, abs=1e-12)
    assert q.error < 1e-12


def test_functional_penalty_on_circle(unit_circle):
    d = flat_disc_seed(np.zeros(3), [0, 0, 1], 1.0)
    assert poisson_functional(PenaltyField(unit_circle, 0.04), d).value == 0.0


def test_functional_node_minimum():
    d = flat_disc_seed(np.zeros(3), [0, 0, 1], 1.0)
    with pytest.raises(HullError):
        poisson_functional(Const(1.0), d, nodes=128)


@pytest.mark.parametrize("normal", [[0, 0, 1], [0, 0, -1], [1, 0, 0], [1, 2, 3]])
def test_flat_disc_seed_geometry(normal):
    d = flat_disc_seed(np.array([0.1, 0.2, 0.3]), normal, 0.7)
    B = d.boundary(256) - np.array([0.1, 0.2, 0.3])
    n = np.asarray(normal, float) / np.linalg.norm(normal)
    assert np.allclose(np.linalg.norm(B, axis=1), 0.7)
    assert np.allclose(B @ n, 0.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                min_size=2, max_size=6),
       st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=3))
def test_polydisc_is_conformal_and_harmonic(f, g):
    d = PolyDisc(np.array(f), np.array(g), np.zeros(3))
    zeta = 0.6 * np.exp(1j * np.linspace(0, 2 * np.pi, 7))
    D = d.derivative(zeta)
    # the complex derivative of a Weierstrass disc is a null vector
    assert np.allclose(np.sum(D ** 2, axis=1), 0.0, atol=1e-9 * (1 + np.abs(D).max() ** 2))
    # the mean over the circle is the value at the center
    assert np.allclose(d.boundary(256).mean(0), d(np.array([0j]))[0], atol=1e-9 * (1 + np.abs(D).max()))


def test_null_line_seed_normalization():
    d = null_line_seed(np.zeros(3), 0.4 - 0.2j, 1.0)
    w = d.derivative(np.array([0.3 + 0.1j]))[0]
    assert np.linalg.norm(w.real) == pytest.approx(1.0)
    assert np.linalg.norm(w.imag) == pytest.approx(1.0)
    assert abs(np.sum(w ** 2)) < 1e-12


def test_problem_validation():
    with pytest.raises(HullError):
        HullProblem(np.zeros((0, 3)))
    with pytest.raises(HullError):
        HullProblem(np.ones((4, 3)) * 1j, "minimal")
    with pytest.raises(HullError):
        HullProblem(np.ones((4, 3)), "other")
    P = HullProblem(np.eye(3))
    assert P.eps == pytest.approx(0.02 * np.sqrt(2))
    assert P.tol == pytest.approx(1e-2)


# -- convex hull -------------------------------------------------------------


@pytest.mark.parametrize("x, outside", [
    ((0, 0, 0), False), ((0.5, 0.5, 0), False), ((2, 0, 0), True), ((0, 0, 0.5), True), ((0.8, 0.8, 0), True),
])
def test_convex_hull_separation(unit_circle, x, outside):
    gap, l = convex_hull_separation(unit_circle, np.array(x, float))
    assert (gap > LP_TOL) == outside
    assert np.all(np.abs(l) <= 1 + 1e-12)


# -- verdicts ----------------------------------------------------------------


def test_origin_inside(unit_circle):
    v = minimal_hull_membership(unit_circle, np.zeros(3))
    assert v.status == INSIDE and v.route == "disc"
    assert v.best_functional < 1e-6
    w = verify_witness(HullProblem(unit_circle), v.disc, np.zeros(3))
    assert w["ok"] and w["center_error"] < 1e-12


def test_far_point_outside_by_lp(unit_circle):
    v = minimal_hull_membership(unit_circle, np.array([2.0, 0, 0]))
    assert v.status == OUTSIDE and v.route == "lp"
    assert v.certificate.gap > LP_TOL
    assert verify_certificate(v.certificate, unit_circle, np.array([2.0, 0, 0]))["ok"]


@pytest.mark.slow
def test_above_center_outside_by_certificate(unit_circle):
    x = np.array([0, 0, 0.5])
    v = minimal_hull_membership(unit_circle, x, lp_prefilter=False)
    assert v.status == OUTSIDE and v.route == "quadratic"
    chk = verify_certificate(v.certificate, unit_circle, x)
    assert chk["margin"] >= -1e-9 and chk["gap"] > 1e-6


def test_certificate_direct_check(unit_circle):
    x = np.array([0, 0, 0.5])
    cert = Certificate(np.diag([0.0, 0, 1]), np.zeros(3), 0.0, "p-psh", 2)
    chk = verify_certificate(cert, unit_circle, x)
    assert chk["margin"] == pytest.approx(0.0, abs=1e-15)
    assert chk["gap"] == pytest.approx(0.25)
    assert chk["ok"]


@pytest.mark.parametrize("cls", ["p-psh", "psh"])
def test_quadratic_certificate_is_sound(unit_circle, cls):
    # the complex classes act on C^3 = R^6
    K = unit_circle if cls == "p-psh" else unit_circle.astype(complex)
    x = np.array([0.0, 0.0, 0.3]) if cls == "p-psh" else np.array([0, 0, 0.3j])
    cert = quadratic_certificate(K, x, cls, 2)
    assert cert is not None
    chk = verify_certificate(cert, K, x)
    assert chk["margin"] >= -1e-9 and chk["gap"] > GAP_MIN
    if cls == "p-psh":
        assert eigen_sum(2 * cert.Q, 2) >= -1e-9
    assert np.all(cert(K) <= 1e-9)


def test_complex_class_needs_even_dimension(unit_circle):
    with pytest.raises(HullError):
        quadratic_certificate(unit_circle, np.zeros(3), "psh")


def test_no_certificate_for_inside_point(unit_circle):
    assert quadratic_certificate(unit_circle, np.array([0.2, 0.1, 0.0]), "p-psh", 2) is None


def test_query_dimension(unit_circle):
    with pytest.raises(HullError):
        minimal_hull_membership(unit_circle, np.zeros(2))


def test_degree_history_non_increasing(unit_circle):
    P = HullProblem(unit_circle)
    res = degree_continuation(P, np.array([0.5, 0.2, 0.0]), degree=3, starts=4, budget=3000)
    h = res.history
    assert len(h) == 3
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))
    assert res.value == pytest.approx(min(h))


def test_optimize_disc_respects_budget(unit_circle):
    P = HullProblem(unit_circle)
    res = optimize_disc(P, np.array([0.5, 0.2, 0.0]), degree=2, starts=4, budget=500)
    assert res.evaluations <= 500
    assert np.allclose(res.best(np.array([0j]))[0], [0.5, 0.2, 0.0])


def test_optimize_disc_stop_at(unit_circle):
    P = HullProblem(unit_circle)
    res = optimize_disc(P, np.zeros(3), degree=1, starts=4, budget=2000, stop_at=P.tol)
    assert res.value <= P.tol and not res.exhausted
    assert res.evaluations < 10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rotation_symmetry(unit_circle, seed):
    Q = rotation(np.random.default_rng(seed))
    K = unit_circle @ Q.T
    v = minimal_hull_membership(K, np.zeros(3))
    assert v.status == INSIDE
    v = minimal_hull_membership(K, Q @ np.array([2.0, 0, 0]))
    assert v.status == OUTSIDE


def test_verdict_to_dict(unit_circle):
    d = minimal_hull_membership(unit_circle, np.array([2.0, 0, 0])).to_dict()
    assert d["status"] == OUTSIDE
    assert d["certificate"]["class"] == "linear"
    assert d["notes"]


# -- null hulls --------------------------------------------------------------


@pytest.mark.parametrize("g0", [0.3 + 0.1j, -1.2 + 0.5j, 2j])
def test_null_disc_center_inside(g0):
    d = null_line_seed(np.zeros(3), g0, 1.0)
    K = d.boundary(256)
    v = null_hull_membership(K, np.zeros(3, complex))
    assert v.status == INSIDE
    assert v.best_functional < 1e-6


def test_null_outside_by_lp():
    K = null_line_seed(np.zeros(3), 0.3 + 0.1j, 1.0).boundary(256)
    v = null_hull_membership(K, np.array([0, 0, 2.0 + 0j]))
    assert v.status == OUTSIDE and v.route == "lp"


def test_real_circle_is_null_convex_at_origin(unit_circle):
    # compact subsets of R^n are polynomially convex, so the origin is separated
    v = null_hull_membership(unit_circle.astype(complex), np.zeros(3, complex))
    assert v.status == OUTSIDE
    assert verify_certificate(v.certificate, unit_circle.astype(complex), np.zeros(3, complex))["ok"]


def test_sandwich_audit():
    K = null_line_seed(np.zeros(3), 0.3 + 0.1j, 1.0).boundary(256)
    for z in (np.zeros(3, complex), np.array([0, 0, 2.0 + 0j])):
        v = null_hull_membership(K, z)
        proxy = polynomial_hull_proxy(K, z)
        # null hull sits inside the polynomial hull
        if proxy == OUTSIDE:
            assert v.status != INSIDE
        if v.status == INSIDE:
            assert proxy == UNKNOWN


# -- measure -----------------------------------------------------------------


def test_measure_flat_disc(unit_circle):
    d = flat_disc_seed(np.zeros(3), [0, 0, 1], 1.0)
    assert covered_measure(unit_circle, d, 4) == pytest.approx(2 * np.pi)
    assert measure_convergence_check(unit_circle, d, 4)


def test_measure_distant_disc(unit_circle):
    d = flat_disc_seed(np.array([0, 0, 1.0]), [0, 0, 1], 1.0)
    assert covered_measure(unit_circle, d, 2) == 0.0
    assert not measure_convergence_check(unit_circle, d, 2)


def test_measure_sequence(unit_circle):
    rows = measure_sequence(unit_circle, np.zeros(3))
    m = [r["measure"] for r in rows]
    assert [r["j"] for r in rows] == [1, 2, 4]
    assert all(b >= a - 1e-12 for a, b in zip(m, m[1:]))
    assert all(r["passes"] for r in rows)


# -- audits ------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(3))
def test_inclusion_audit(seed):
    rng = np.random.default_rng(seed)
    K = rng.normal(size=(30, 3))
    out = inclusion_audit(K, rng.normal(size=(3, 3)))
    assert out["passed"]
    assert {r["status"] for r in out["rows"]} <= {INSIDE, OUTSIDE, UNKNOWN}


def test_hull_sweep_shape(unit_circle):
    rows = hull_sweep(unit_circle, plane="xy", extent=2.0, grid=3, budget=200, degree=1, starts=2)
    assert len(rows) == 9
    status = {tuple(r[:3]): r[3] for r in rows}
    assert status[(0.0, 0.0, 0.0)] == INSIDE
    assert status[(2.0, 2.0, 0.0)] == OUTSIDE


def test_hull_sweep_plane():
    with pytest.raises(HullError):
        hull_sweep(np.eye(3), plane="ab")
