import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvlab.curvature import sectional
from curvlab.errors import DegeneracyError, DomainError
from curvlab.metrics import (
    Rect,
    Regularity,
    flat,
    from_components,
    hw1_sectional,
    hw2_sectional,
    make_constant_curvature,
    make_hw1,
    make_hw2,
    nondegeneracy_scan,
    parse_metric,
    wedge_norm,
)

from oracles import hw1_curvature, hw2_curvature

CATALOG = [flat(), make_hw1(1.5), make_hw1(1.2), make_hw2(1.5), make_hw2(1.8),
           make_constant_curvature(1.0), make_constant_curvature(-1.0), make_constant_curvature(0.0)]


def test_hw1_examples():
    g = make_hw1(1.5)
    assert np.array_equal(g((0.0, 0.0)), np.eye(2))
    assert np.allclose(g((1.0, 0.0)), 2 * np.eye(2), atol=1e-15)
    assert g.regularity == Regularity.C1
    p = (0.5, 0.3)
    assert g.sectional(np.array(p)) == pytest.approx(sectional(g, p, exact=False), rel=1e-3)


def test_hw2_examples():
    g = make_hw2(1.5)
    assert np.array_equal(g((0.0, 0.7)), np.eye(2))
    assert np.allclose(g((0.5, 0.0)), np.diag([1.0, 1 - 0.5 ** 1.5]), atol=1e-15)
    assert g.regularity == Regularity.C1
    assert g.domain.as_list() == [-0.9, 0.9, -1.0, 1.0]
    p = (0.4, 0.1)
    assert g.sectional(np.array(p)) == pytest.approx(sectional(g, p, exact=False), rel=1e-3)


def test_hw2_evaluation_error_outside_strip():
    with pytest.raises(DomainError):
        make_hw2(1.5)((1.0, 0.0))


@pytest.mark.parametrize("bad", [1.0, 2.0, 0.5, 2.5])
def test_lambda_range(bad):
    with pytest.raises(DomainError):
        make_hw1(bad)
    with pytest.raises(DomainError):
        make_hw2(bad)


def test_constant_curvature_examples():
    assert np.array_equal(make_constant_curvature(0)((0.37, -0.2)), np.eye(2))
    g = make_constant_curvature(1.0)
    assert np.allclose(g((0.0, 0.0)), 4 * np.eye(2))
    assert sectional(g, (0.3, 0.2), exact=False) == pytest.approx(1.0, abs=1e-4)
    assert g.regularity == Regularity.SMOOTH
    h = make_constant_curvature(-1.0)
    # hyperbolic chart: disk of radius 0.9/sqrt(-k)
    assert h.domain.width <= 2 * 0.9 + 1e-12
    assert sectional(h, (0.2, -0.3), exact=False) == pytest.approx(-1.0, abs=1e-4)


@pytest.mark.parametrize("lam", [1.2, 1.5, 1.8])
def test_hw_closed_forms_against_symbolic_oracle(lam):
    k1, k2 = hw1_curvature(lam), hw2_curvature(lam)
    for x in (-0.8, -0.35, 0.05, 0.2, 0.5, 0.85):
        assert hw1_sectional(x, lam) == pytest.approx(k1(x, 0.0), rel=1e-10)
        assert hw2_sectional(x, lam) == pytest.approx(k2(x, 0.0), rel=1e-10)


@pytest.mark.parametrize("make,lam", [(make_hw1, 1.5), (make_hw1, 1.3), (make_hw2, 1.5), (make_hw2, 1.7)])
def test_analytic_vs_fd_away_from_axis(make, lam):
    g = make(lam)
    rng = np.random.default_rng(1)
    xs = rng.uniform(0.2, 0.85, 30) * rng.choice([-1, 1], 30)
    ys = rng.uniform(-0.8, 0.8, 30)
    for x, y in zip(xs, ys):
        exact = float(g.sectional(np.array([x, y])))
        assert sectional(g, (x, y), exact=False) == pytest.approx(exact, rel=1e-3)


def test_hw_blowup_signs():
    # HW1 tends to -inf near the axis, HW2 to +inf
    assert hw1_sectional(1e-4, 1.5) < -10
    assert hw2_sectional(1e-4, 1.5) > 10


@pytest.mark.parametrize("field", CATALOG, ids=lambda f: f.name)
def test_spd_at_random_points(field):
    rng = np.random.default_rng(7)
    d = field.domain
    pts = np.column_stack([rng.uniform(d.x0, d.x1, 10_000), rng.uniform(d.y0, d.y1, 10_000)])
    g = field(pts)
    assert np.array_equal(g, np.swapaxes(g, -1, -2))
    assert np.all(np.linalg.eigvalsh(g)[:, 0] > 0)


def test_nondegeneracy_scan_examples():
    assert nondegeneracy_scan(flat(), 7) == (1.0, 1.0)
    lo, hi = nondegeneracy_scan(make_hw1(1.5), 101)
    assert (lo, hi) == (pytest.approx(1.0), pytest.approx(2.0))
    lo, hi = nondegeneracy_scan(make_hw2(1.5), 101)
    assert lo == pytest.approx(1 - 0.9 ** 1.5) and hi == pytest.approx(1.0)


def test_nondegeneracy_scan_reports_point():
    bad = from_components(lambda x, y: x, lambda x, y: 0.0, lambda x, y: 1.0, Rect(-1, 1, -1, 1))
    with pytest.raises(DegeneracyError) as info:
        nondegeneracy_scan(bad, 5)
    assert info.value.point[0] <= 0
    with pytest.raises(DomainError):
        nondegeneracy_scan(flat(), 1)


def test_wedge_norm_examples():
    assert wedge_norm(np.eye(2), (1, 0), (0, 1)) == 1.0
    assert wedge_norm(np.diag([2.0, 3.0]), (1, 0), (0, 1)) == 6.0
    g = np.array([[2.0, 0.3], [0.3, 1.5]])
    assert wedge_norm(g, (0.4, -1.1), (0.8, -2.2)) == pytest.approx(0.0, abs=1e-15)


def test_wedge_norm_is_det_times_area():
    # for any SPD g, |v^w|_g^2 = det(g) * det[v w]^2
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = rng.normal(size=(2, 2))
        g = a @ a.T + 0.1 * np.eye(2)
        v, w = rng.normal(size=(2, 2))
        expected = np.linalg.det(g) * (v[0] * w[1] - v[1] * w[0]) ** 2
        assert wedge_norm(g, v, w) == pytest.approx(expected, rel=1e-9, abs=1e-12)


spd_entries = st.tuples(st.floats(0.2, 3.0), st.floats(-0.5, 0.5), st.floats(0.2, 3.0))
vec = st.tuples(st.floats(-3, 3), st.floats(-3, 3))


@settings(max_examples=200, deadline=None)
@given(e=spd_entries, v=vec, w=vec, t=st.floats(-5, 5), s=st.floats(-3, 3), r=st.floats(-3, 3))
def test_wedge_norm_shear_and_scale(e, v, w, t, s, r):
    g = np.array([[e[0], e[1]], [e[1], e[2]]])
    base = wedge_norm(g, v, w)
    scale = 1 + float(np.dot(v, v)) * float(np.dot(w, w)) * (1 + abs(t)) ** 2
    sheared = wedge_norm(g, v, np.add(w, np.multiply(t, v)))
    assert sheared == pytest.approx(base, abs=1e-9 * scale * 10)
    scaled = wedge_norm(g, np.multiply(s, v), np.multiply(r, w))
    assert scaled == pytest.approx(s * s * r * r * base, abs=1e-9 * scale * (1 + s * s * r * r) * 10)


def test_parse_metric():
    assert parse_metric("flat").name == "flat"
    assert parse_metric("hw1(1.5)")((1.0, 0.0))[0, 0] == pytest.approx(2.0)
    assert parse_metric(" hw2( 1.25 ) ")((0.0, 0.0))[1, 1] == 1.0
    assert parse_metric("constk(-0.5)").sectional(np.array([0.1, 0.1])) == pytest.approx(-0.5)
    for bad in ("hw3(1.5)", "constk", "hw1()", "sphere"):
        with pytest.raises(DomainError):
            parse_metric(bad)
    with pytest.raises(DomainError, match=r"\(1, 2\)"):
        parse_metric("hw1(2.5)")


def test_rect_helpers():
    r = Rect(-1, 1, 0, 2)
    assert r.width == 2 and r.height == 2
    assert np.array_equal(r.center, [0, 1])
    assert r.contains((0.5, 0.5)) and not r.contains((1.5, 0.5))
    assert r.boundary_distance((0.5, 1.0)) == pytest.approx(0.5)
    assert r.shrink(0.25).as_list() == [-0.75, 0.75, 0.25, 1.75]
    with pytest.raises(DomainError):
        Rect(1, 0, 0, 1)


def test_metric_values_are_pure():
    g = make_hw1(1.5)
    p = np.array([[0.3, 0.1], [0.3, 0.1]])
    a = g(p)
    b = g(p)
    assert np.array_equal(a, b) and np.array_equal(a[0], a[1])
    assert math.isclose(g.norm2((0.3, 0.1), (1.0, 0.0)), 1 + 0.3 ** 1.5)
