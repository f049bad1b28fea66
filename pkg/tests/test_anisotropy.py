import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anithresh.anisotropy import (
    Constant,
    CosineSeries,
    Elliptic,
    RegularizedCrystalline,
    anisotropy_from_dict,
    classify,
    evaluate,
    homogeneous_extension,
    polygon_area,
    solve_young,
    winterbottom_shape,
    wulff_envelope,
    young_residual,
)
from anithresh.errors import NoIntersection, NoRoot, NotWeak

VARIANTS = [
    Constant(1.3),
    CosineSeries(((0.05, 4, 0.0),)),
    CosineSeries(((0.05, 4, 8.0), (0.02, 3, 0.4))),
    Elliptic(2.0, 1.0),
    Elliptic(0.7, 1.9),
    RegularizedCrystalline(0.01),
    RegularizedCrystalline(0.3),
]


def fd(gamma, th, h):
    """Central differences, Richardson-extrapolated once (fourth order)."""
    g = lambda t: float(gamma(t))

    def raw(k):
        return (g(th + k) - g(th - k)) / (2 * k), (g(th + k) - 2 * g(th) + g(th - k)) / k**2

    (a1, a2), (b1, b2) = raw(h), raw(h / 2)
    return (4 * b1 - a1) / 3, (4 * b2 - a2) / 3


def test_examples():
    assert evaluate(Constant(1.0), 0.7) == (1.0, 0.0, 0.0)
    g, d1, d2 = evaluate(CosineSeries(((0.05, 4, 0.0),)), 0.0)
    assert (g, d1, d2) == pytest.approx((1.05, 0.0, -0.8), abs=1e-14)
    assert evaluate(Elliptic(2.0, 1.0), 0.0) == pytest.approx((1.0, 0.0, 3.0), abs=1e-12)


@pytest.mark.parametrize("gamma", VARIANTS, ids=repr)
def test_derivatives_match_finite_differences(gamma):
    # eps=0.01 varies on the scale eps near the axes: smaller step there
    h = 2e-4 if getattr(gamma, "eps", 1.0) < 0.1 else 2e-3
    for th in np.linspace(-3.0, 3.0, 23) + 0.05:
        _, a1, a2 = evaluate(gamma, th)
        n1, n2 = fd(gamma, th, h)
        assert a1 == pytest.approx(n1, rel=1e-6, abs=1e-7)
        assert a2 == pytest.approx(n2, rel=1e-6, abs=1e-5)


@given(st.floats(-20, 20))
def test_two_pi_periodic(th):
    for gamma in VARIANTS:
        a = np.array(evaluate(gamma, th))
        b = np.array(evaluate(gamma, th + 2 * math.pi))
        assert np.allclose(a, b, rtol=1e-9, atol=1e-7)


def test_positivity_checked():
    with pytest.raises(ValueError):
        CosineSeries(((1.5, 2, 0.0),))


def test_homogeneous_extension():
    assert homogeneous_extension(Constant(1.0), (3.0, 4.0)) == pytest.approx(5.0)
    assert homogeneous_extension(Elliptic(2.0, 1.0), (0.0, 0.0)) == 0.0
    # Elliptic is defined directly on vectors
    assert homogeneous_extension(Elliptic(2.0, 1.0), (1.0, 0.0)) == pytest.approx(2.0)
    assert homogeneous_extension(Elliptic(2.0, 1.0), (0.0, 3.0)) == pytest.approx(3.0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 50))
def test_homogeneity(x, y, lam):
    for gamma in VARIANTS:
        a = homogeneous_extension(gamma, (lam * x, lam * y))
        b = lam * homogeneous_extension(gamma, (x, y))
        assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_crystalline_cartesian_form():
    eps = 0.2
    gamma = RegularizedCrystalline(eps)
    for x, y in [(1.0, 0.0), (0.6, 0.8), (-0.28, 0.96)]:
        want = math.sqrt(eps**2 + x**2) + math.sqrt(eps**2 + y**2)
        assert homogeneous_extension(gamma, (x, y)) == pytest.approx(want, rel=1e-12)


def test_classify():
    assert classify(CosineSeries(((0.05, 4, 0.0),))).tag == "weak"
    assert classify(CosineSeries(((0.25, 4, 0.0),))).tag == "strong"
    assert classify(Constant(2.0)).tag == "isotropic"
    with pytest.raises(ValueError):
        classify(Constant(1.0), n_samples=100)


@given(st.floats(0.001, 0.6), st.integers(2, 8))
def test_classify_single_mode_closed_form(beta, m):
    crit = beta * (m * m - 1)
    if abs(crit - 1) < 1e-3:
        return
    tag = classify(CosineSeries(((beta, m, 0.0),))).tag
    assert (tag == "weak") == (crit < 1)


def test_envelope_examples():
    assert wulff_envelope(CosineSeries(((0.05, 4, 0.0),)), 0.0) == pytest.approx((0.0, 1.05))
    th = np.linspace(-math.pi, math.pi, 777)
    x, y = wulff_envelope(Constant(1.0), th)
    assert np.allclose(x, -np.sin(th)) and np.allclose(y, np.cos(th))
    x, y = wulff_envelope(Constant(2.5), th)
    assert np.max(np.abs(np.hypot(x, y) - 2.5)) < 1e-12


def test_elliptic_envelope_is_ellipse():
    # gamma(n) = |(a n_x, b n_y)| has Wulff shape x^2/a^2 + y^2/b^2 = 1
    th = np.linspace(-math.pi, math.pi, 500)
    x, y = wulff_envelope(Elliptic(2.0, 1.0), th)
    assert np.max(np.abs(x**2 / 4 + y**2 - 1)) < 1e-12
    x, y = wulff_envelope(Elliptic(1.0, 2.0), th)
    assert np.max(np.abs(x**2 + (y / 2) ** 2 - 1)) < 1e-12


def test_young_isotropic():
    sol = solve_young(Constant(1.0), 1.5, 1.0)
    assert sol.degrees == pytest.approx((120.0, -120.0), abs=1e-7)
    sol = solve_young(Constant(1.0), 1.0, 1.0)
    assert sol.degrees == pytest.approx((90.0, -90.0), abs=1e-7)


@given(st.floats(-0.95, 0.95))
def test_young_isotropic_arccos(h):
    sol = solve_young(Constant(1.0), 1.0, 1.0 + h)
    assert sol.left_angle == pytest.approx(math.acos(h), abs=1e-8)
    assert sol.right_angle == pytest.approx(-math.acos(h), abs=1e-8)


def test_young_tilted_reference():
    sol = solve_young(CosineSeries(((0.05, 4, 8.0),)), 1.0, 1.1)
    left, right = sol.degrees
    assert left == pytest.approx(94.58, abs=0.05)
    assert right == pytest.approx(-77.67, abs=0.05)


@pytest.mark.parametrize("gamma", VARIANTS[:5], ids=repr)
def test_young_residual_at_roots(gamma):
    sol = solve_young(gamma, 1.2, 1.0)
    for r in sol.all_roots:
        assert abs(float(young_residual(gamma, r, 1.2, 1.0))) < 1e-8


def test_young_no_root():
    with pytest.raises(NoRoot):
        solve_young(Constant(1.0), 3.0, 1.0)


def test_winterbottom_half_disc():
    poly = winterbottom_shape(Constant(1.0), 1.0, 1.0, math.pi / 2)
    assert polygon_area(poly) == pytest.approx(math.pi / 2, rel=1e-9)
    assert np.max(np.abs(np.hypot(poly[:, 0], poly[:, 1]) - 1)) < 1e-6
    assert poly[:, 1].min() >= -1e-12


def test_winterbottom_reference_shape():
    gamma = CosineSeries(((0.05, 4, 0.0),))
    poly = winterbottom_shape(gamma, 1.5, 1.0, 6.25)
    assert polygon_area(poly) == pytest.approx(6.25, rel=1e-8)
    sol = solve_young(gamma, 1.5, 1.0)
    # endpoints sit on the substrate; end tangents reproduce the Young angles
    assert poly[0, 1] == 0.0 and poly[-1, 1] == 0.0
    t_right = poly[1] - poly[0]
    t_left = poly[-1] - poly[-2]
    # counter-clockwise boundary: outer normal = tangent rotated by -90 degrees
    n_right = (t_right[1], -t_right[0])
    n_left = (t_left[1], -t_left[0])
    ang = lambda n: math.degrees(math.atan2(-n[0], n[1]))
    assert ang(n_left) == pytest.approx(sol.degrees[0], abs=0.1)
    assert ang(n_right) == pytest.approx(sol.degrees[1], abs=0.1)


def test_winterbottom_dewetting_limit():
    # cut height gamma_SV - gamma_SP close to -1 keeps almost the whole disc
    poly = winterbottom_shape(Constant(1.0), 2.0 - 1e-9, 1.0, math.pi)
    c = poly.mean(axis=0)
    rad = np.hypot(poly[:, 0] - c[0], poly[:, 1] - c[1])
    assert rad.std() / rad.mean() < 1e-3
    assert poly[:, 1].min() == pytest.approx(0.0, abs=1e-9)


def test_winterbottom_errors():
    with pytest.raises(NotWeak):
        winterbottom_shape(CosineSeries(((0.25, 4, 0.0),)), 1.0, 1.0, 1.0)
    with pytest.raises(NoIntersection):
        winterbottom_shape(Constant(1.0), 3.0, 1.0, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(-0.8, 0.8))
def test_winterbottom_area(area, h):
    poly = winterbottom_shape(CosineSeries(((0.04, 4, 0.3),)), 1.0, 1.0 + h, area)
    assert polygon_area(poly) == pytest.approx(area, rel=1e-6)


def test_from_dict_round_trip():
    for gamma in VARIANTS:
        again = anisotropy_from_dict(gamma.to_dict())
        th = np.linspace(-3, 3, 11)
        assert np.allclose(gamma(th), again(th))
    with pytest.raises(ValueError):
        anisotropy_from_dict({"type": "hexagonal"})
