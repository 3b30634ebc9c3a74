from fractions import Fraction

import numpy as np
import pytest

from minconvex.domains import (
    BoundaryPointError,
    DegenerateGradientError,
    MedialAxisError,
    ball,
    boundary_curvatures,
    boundary_mesh,
    catenoid_domain,
    check_p_convex_boundary,
    distance_jet,
    exhaustion_builder,
    expr_domain,
    foot_points,
    halfspace,
    linear_profile,
    log_dist_field,
    mmn_circles,
    mmn_domain,
    mmn_heights,
    obstacle_domain,
    parse_domain,
    principal_curvatures,
    slab,
    tangent_basis,
    write_obj,
)
from minconvex.fields import parse_field
from minconvex.psh import check_p_psh, trace_on_plane


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_sphere_curvatures(r, rng):
    D = ball(r)
    P = D.boundary_samples(50, seed=3)
    for x in P:
        np.testing.assert_allclose(principal_curvatures(D, x).kappas, [1 / r, 1 / r], atol=1e-8)


def test_slab_is_flat():
    rep = principal_curvatures(slab(0, 1), [0.3, -0.2, 1.0])
    np.testing.assert_allclose(rep.kappas, [0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(rep.inner_normal, [0, 0, -1])


def test_catenoid_boundary_is_minimal():
    D = catenoid_domain()
    P, K = boundary_curvatures(D, 200)
    assert np.max(np.abs(K.sum(axis=1))) < 1e-8
    assert np.all(K[:, 0] < 0) and np.all(K[:, 1] > 0)


def test_boundary_sample_invariants():
    for D in (ball(1.3), catenoid_domain(), slab(-1, 1), halfspace()):
        P = D.boundary_samples(100, seed=1)
        v, g, _ = D.rho.evaluate(P)
        assert np.max(np.abs(v)) < 1e-10
        assert np.min(np.linalg.norm(g, axis=1)) > 1e-8


def test_curvature_sum_matches_tangential_trace():
    D = catenoid_domain()
    for x in D.boundary_samples(40, seed=5):
        v, g, H = D.rho.evaluate(x)
        rep = principal_curvatures(D, x)
        tr = trace_on_plane(H, tangent_basis(g))
        assert abs(rep.kappas.sum() * np.linalg.norm(g) - tr) < 1e-8


def test_curvature_errors():
    with pytest.raises(BoundaryPointError):
        principal_curvatures(ball(1.0), [0.5, 0, 0])
    from minconvex.domains import ImplicitDomain

    cone = ImplicitDomain(parse_field("x1^2+x2^2-x3^2", 3), "cone")
    with pytest.raises(DegenerateGradientError):
        principal_curvatures(cone, [0.0, 0.0, 0.0])


@pytest.mark.parametrize(
    "D,p,mode,result",
    [
        (catenoid_domain(), 2, "weak", "holds"),
        (catenoid_domain(), 1, "weak", "fails"),
        (ball(1.0), 1, "strong", "holds"),
        (ball(1.0), 2, "strong", "holds"),
        (slab(0, 1), 2, "strong", "inconclusive"),
        (slab(0, 1), 2, "weak", "holds"),
    ],
)
def test_boundary_verdicts(D, p, mode, result):
    v = check_p_convex_boundary(D, p, mode)
    assert v.result == result
    assert v.samples >= 200


def test_catenoid_p1_witness():
    v = check_p_convex_boundary(catenoid_domain(), 1)
    assert v.witness["kappas"][0] < 0
    assert v.margin == pytest.approx(-1.0, abs=1e-6)


def test_ball_strong_margin():
    assert check_p_convex_boundary(ball(1.0), 1, "strong").margin == pytest.approx(1.0)


def test_p_range():
    with pytest.raises(ValueError):
        check_p_convex_boundary(ball(1.0), 3)


def test_log_distance_examples():
    assert log_dist_field(halfspace()).value(np.array([0, 0, -np.exp(-1)])) == pytest.approx(1.0)
    L = log_dist_field(ball(1.0))
    for r in (0.1, 0.5, 0.9):
        assert L.value(np.array([0.0, r, 0.0])) == pytest.approx(-np.log(1 - r))


def test_distance_derivatives_for_ball(rng):
    X = rng.normal(size=(30, 3))
    X *= (0.2 + 0.7 * rng.random(30))[:, None] / np.linalg.norm(X, axis=1, keepdims=True)
    d, far = distance_jet(ball(1.0), X)
    r = np.linalg.norm(X, axis=1)
    np.testing.assert_allclose(d.v, 1 - r, atol=1e-10)
    np.testing.assert_allclose(d.g, -X / r[:, None], atol=1e-8)
    P = np.eye(3)[None] - X[:, :, None] * X[:, None, :] / r[:, None, None] ** 2
    np.testing.assert_allclose(d.h, -P / r[:, None, None], atol=1e-6)


def test_medial_axis_detected():
    with pytest.raises(MedialAxisError):
        foot_points(slab(-1, 1), np.array([[0.0, 0.0, 0.0]]))


def test_catenoid_collar_log_distance_is_2psh():
    D = catenoid_domain()
    v = check_p_psh(log_dist_field(D), D.collar_region(0.05, 0.5), 2, "weak", tol=1e-6, samples=300)
    assert v.holds


def test_exhaustion_examples():
    E = exhaustion_builder(ball(1.0), chi=(0.2, 0.8), h=linear_profile(1.0))
    assert E.value(np.zeros(3)) == pytest.approx(0.0)
    assert E.value(np.array([0.95, 0, 0])) == pytest.approx(-np.log(0.05) + 0.9025, rel=1e-10)
    assert E.value(np.array([0, 0.999, 0])) > E.value(np.array([0, 0.99, 0])) > 4


def test_catenoid_exhaustion_strongly_2psh():
    D = catenoid_domain()
    v = check_p_psh(exhaustion_builder(D), D.collar_region(0.05, 1.0), 2, "strong", samples=300)
    assert v.result == "holds" and v.margin > 0


def test_obstacle_validation():
    D = obstacle_domain()
    rep = D.meta["validation"]
    assert rep["covers_sphere"] and rep["avoids_half_ball"] and rep["radii_distinct"]
    assert D.membership([[0.0, 0.0, 0.0]])[0] == "inside"
    assert D.membership([[3.0, 0.0, 0.0]])[0] == "outside"


def test_obstacle_rejects_impossible_aperture():
    from minconvex.domains import DomainConstructionError

    with pytest.raises(DomainConstructionError):
        obstacle_domain(m=4, r=1.02)


def test_mmn_heights_prefix():
    expected = []
    d = 2
    while len(expected) < 20:
        expected += [(k, d) for k in range(1, d)]
        d += 1
    assert mmn_heights(20) == expected[:20]
    assert [Fraction(k, d) for k, d in mmn_heights(4)] == [Fraction(1, 2), Fraction(1, 3), Fraction(2, 3), Fraction(1, 4)]


def test_mmn_circle_radii():
    C = mmn_circles(3)
    assert [c.radius for c in C] == [1.5, 1.5, 1.25, 1.75, 1 + 1 / 6, 2 - 1 / 6]


def test_mmn_membership_three_valued():
    D = mmn_domain()
    out = D.membership(np.array([[1.5, 0, 0.5], [1.5, 0, 0.51], [3, 0, 0.5]]))
    assert list(out) == ["too_close", "inside", "outside"]


@pytest.mark.parametrize("spec,name", [("ball:2", "ball"), ("slab:0,1", "slab"), ("catenoid", "catenoid")])
def test_parse_domain(spec, name):
    assert parse_domain(spec).name.startswith(name)


def test_parse_domain_unknown():
    with pytest.raises(ValueError):
        parse_domain("torus:1")


def test_expr_domain_and_mesh(tmp_path):
    p = tmp_path / "d.json"
    p.write_text('{"dim": 3, "expr": "x1^2+x2^2/4+x3^2-1"}')
    D = expr_domain(str(p))
    assert D.contains([[0.0, 1.5, 0.0]])[0]
    V, F = boundary_mesh(D, resolution=24)
    assert len(V) > 0 and F.shape[1] == 3
    out = tmp_path / "m.obj"
    write_obj(out, V, F)
    lines = out.read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == len(V)
    assert sum(l.startswith("f ") for l in lines) == len(F)
