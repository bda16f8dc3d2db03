import math

import numpy as np
import pytest
from scipy import integrate

from curvlab.errors import BoundaryError, DomainError
from curvlab.metrics import Rect, flat, make_constant_curvature, make_hw1, make_hw2, nondegeneracy_scan
from curvlab.paths import (
    Polyline,
    curve_length,
    geodesic_bvp,
    geodesic_ivp,
    grid_distance,
    minimizer_multiplicity,
    pairwise_distances,
    polyline_lengths,
    refine_path,
)

from oracles import hw1_distance, model_plane_distance


def straight(p, q, n=2):
    return np.linspace(p, q, n)


# ---------------------------------------------------------------- lengths


def test_curve_length_examples():
    assert curve_length(flat(Rect(-1, 5, -1, 5)), [(0, 0), (3, 4)]) == pytest.approx(5.0, abs=1e-14)
    for t in (0.2, 0.7):
        assert curve_length(make_hw1(1.5), straight((0, 0), (0, t), 9)) == pytest.approx(t, abs=1e-14)
    r = 0.6
    sphere = make_constant_curvature(1.0)
    oracle, _ = integrate.quad(lambda s: 2 / (1 + s * s), -r, r, epsabs=1e-14)
    assert oracle == pytest.approx(4 * math.atan(r), abs=1e-13)
    assert curve_length(sphere, straight((-r, 0), (r, 0), 4001)) == pytest.approx(oracle, abs=1e-7)


def test_curve_length_zero_iff_coincident():
    assert curve_length(flat(), [(0.1, 0.2)] * 3) == 0.0
    assert curve_length(flat(), [(0.1, 0.2), (0.1, 0.2 + 1e-9)]) > 0


def test_curve_length_errors():
    with pytest.raises(DomainError):
        curve_length(flat(), [(0, 0)])
    with pytest.raises(DomainError):
        curve_length(flat(), [(0, 0), (1.5, 0)])


def test_midpoint_insertion_within_quadrature_error():
    t = np.linspace(0, 1, 65)
    curve = np.column_stack([-0.6 + 1.2 * t, 0.3 * np.sin(3 * t) - 0.1])
    for field in (make_hw1(1.5), make_hw2(1.5), make_constant_curvature(-1.0)):
        pts, lengths = curve, [curve_length(field, curve)]
        for _ in range(3):
            pts = np.insert(pts, range(1, len(pts)), 0.5 * (pts[:-1] + pts[1:]), axis=0)
            lengths.append(curve_length(field, pts))
        increase = np.diff(lengths)
        assert np.all(increase <= 1e-4 * lengths[0])
        # changes shrink at the trapezoid rate, so they are quadrature error
        assert abs(increase[-1]) <= abs(increase[0]) / 10


# ---------------------------------------------------------------- grid distance


def test_grid_distance_examples():
    d, path = grid_distance(flat(Rect(-1, 5, -1, 5)), (0, 0), (3, 4), 201)
    assert d == pytest.approx(5.0, rel=1.5e-2)
    assert d >= 5.0 - 1e-12
    assert np.array_equal(path.points[0], [0, 0]) and np.array_equal(path.points[-1], [3, 4])
    assert grid_distance(make_hw2(1.5), (0.2, 0.3), (0.2, 0.3), 64)[0] == 0.0
    d, _ = grid_distance(make_hw1(1.5), (0, -0.5), (0, 0.5), 101)
    assert d == pytest.approx(1.0, rel=1e-2)


def test_grid_distance_neighbourhoods_and_errors():
    f = flat(Rect(-1, 5, -1, 5))
    d8, _ = grid_distance(f, (0, 0), (3, 4), 121, neighborhood=8)
    d16, _ = grid_distance(f, (0, 0), (3, 4), 121, neighborhood=16)
    assert d16 <= d8
    with pytest.raises(DomainError):
        grid_distance(f, (0, 0), (3, 4), 16)
    with pytest.raises(DomainError):
        grid_distance(flat(), (0, 0), (3, 4), 64)


def test_grid_distance_symmetric():
    rng = np.random.default_rng(1)
    for field in (make_hw1(1.5), make_hw2(1.5)):
        d = field.domain.shrink(0.05)
        for _ in range(4):
            p, q = rng.uniform([d.x0, d.y0], [d.x1, d.y1], (2, 2))
            a, _ = grid_distance(field, p, q, 65)
            b, _ = grid_distance(field, q, p, 65)
            assert a == pytest.approx(b, abs=1e-9)


def test_resolution_convergence():
    p, q = (-0.6, -0.5), (0.7, 0.4)
    for field in (make_hw1(1.5), make_constant_curvature(1.0)):
        ds = [grid_distance(field, p, q, n)[0] for n in (33, 65, 129, 257)]
        deltas = [abs(b - a) for a, b in zip(ds, ds[1:])]
        assert deltas[-1] <= deltas[0]


# ---------------------------------------------------------------- refinement


def test_refine_zigzag_flat():
    steps = np.array([(0, 0)] + [((i + 1) // 2 / 10, i // 2 / 10) for i in range(1, 21)], float)
    assert np.allclose(steps[-1], [1, 1])
    f = flat(Rect(-0.5, 1.5, -0.5, 1.5))
    assert curve_length(f, steps) == pytest.approx(2.0)
    out = refine_path(f, Polyline(steps, 2.0), 50)
    assert out.length == pytest.approx(math.sqrt(2), abs=1e-3)
    assert np.array_equal(out.points[0], steps[0]) and np.array_equal(out.points[-1], steps[-1])


def test_refine_straight_is_stationary():
    pts = straight((-0.3, 0.1), (0.5, 0.4), 11)
    out = refine_path(flat(), Polyline(pts, 0.0), 5)
    assert np.max(np.abs(out.points - pts)) <= 1e-12
    assert out.length == pytest.approx(curve_length(flat(), pts), abs=1e-12)


def test_refine_hw2_axis_below_half():
    pts = straight((0, 0), (0, 0.5), 33)
    out = refine_path(make_hw2(1.5), Polyline(pts, 0.5), 50)
    assert out.length < 0.5
    assert out.length == pytest.approx(curve_length(make_hw2(1.5), out.points), abs=1e-15)
    with pytest.raises(DomainError):
        refine_path(make_hw2(1.5), Polyline(pts, 0.5), 0)


def test_refine_never_lengthens():
    rng = np.random.default_rng(2)
    field = make_hw1(1.5)
    pts = np.vstack([(-0.5, -0.5), rng.uniform(-0.7, 0.7, (10, 2)), (0.5, 0.6)])
    before = curve_length(field, pts)
    lengths = [before]
    cur = Polyline(pts, before)
    for _ in range(5):
        cur = refine_path(field, cur, 1)
        lengths.append(cur.length)
    assert all(b <= a + 1e-15 for a, b in zip(lengths, lengths[1:]))


# ---------------------------------------------------------------- distances


def test_distance_axioms():
    field = make_hw1(1.5)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.7, 0.7, (6, 2))
    i, j = np.triu_indices(6, 1)
    dij, eij = pairwise_distances(field, pts[i], pts[j])
    dji, _ = pairwise_distances(field, pts[j], pts[i])
    assert np.allclose(dij, dji, atol=1e-6 * dij.max())
    assert np.all(dij > 0)
    assert np.all(pairwise_distances(field, pts, pts)[0] == 0)
    D = np.zeros((6, 6))
    E = np.zeros((6, 6))
    D[i, j] = D[j, i] = dij
    E[i, j] = E[j, i] = eij
    tol = 2 * max(E.max(), 1e-6 * D.max())
    for a in range(6):
        for b in range(6):
            for c in range(6):
                assert D[a, c] <= D[a, b] + D[b, c] + tol


def test_upper_bound_chain():
    rng = np.random.default_rng(4)
    for field in (make_hw1(1.5), make_hw2(1.5), make_constant_curvature(-1.0)):
        lam_min, _ = nondegeneracy_scan(field, 129)
        dom = field.domain.shrink(0.1 * field.domain.width)
        P = rng.uniform([dom.x0, dom.y0], [dom.x1, dom.y1], (4, 2))
        Q = rng.uniform([dom.x0, dom.y0], [dom.x1, dom.y1], (4, 2))
        refined, _ = pairwise_distances(field, P, Q)
        for p, q, r in zip(P, Q, refined):
            lat, _ = grid_distance(field, p, q, 65)
            assert lat >= r
            assert r >= math.sqrt(lam_min) * np.hypot(*(q - p)) - 1e-12


@pytest.mark.parametrize("k", [1.0, -1.0, 0.0])
def test_refined_and_shot_distances_match_model(k):
    field = make_constant_curvature(k)
    rng = np.random.default_rng(5)
    P = rng.uniform(-0.35, 0.35, (6, 2))
    Q = rng.uniform(-0.35, 0.35, (6, 2))
    exact = np.array([model_plane_distance(k, p, q) for p, q in zip(P, Q)])
    refined, err = pairwise_distances(field, P, Q)
    assert np.allclose(refined, exact, rtol=2e-4)
    # a refined polyline is an upper bound up to trapezoid error
    assert np.all(refined >= exact * (1 - 5e-5))
    shot, serr = pairwise_distances(field, P, Q, method="shoot")
    assert np.allclose(shot, exact, rtol=1e-7)
    assert np.all(np.abs(shot - exact) <= serr + 1e-12)


def test_refined_distance_matches_shooting_oracle_hw1():
    pairs = [((-0.5, -0.2), (0.6, 0.3)), ((0.1, -0.7), (0.2, 0.6))]
    P, Q = np.array(pairs).transpose(1, 0, 2)
    d, _ = pairwise_distances(make_hw1(1.5), P, Q)
    for (p, q), di in zip(pairs, d):
        assert di == pytest.approx(hw1_distance(1.5, p, q), rel=1e-4)


def test_pairwise_errors():
    with pytest.raises(DomainError):
        pairwise_distances(flat(), [(0, 0)], [(0.5, 0.5)], method="exact")


# ---------------------------------------------------------------- geodesics


def test_ivp_straight_line():
    sol = geodesic_ivp(flat(Rect(-2, 2, -2, 2)), (0, 0), (1, 0), 1.0, 1e-2)
    assert np.allclose(sol.trajectory.points[-1], [1, 0], atol=1e-9)
    assert sol.exit_reason == "reached-time"
    assert sol.length == pytest.approx(1.0, abs=1e-12)


def test_ivp_hw1_axis():
    sol = geodesic_ivp(make_hw1(1.5), (0, 0), (0, 1), 0.8, 1e-3)
    assert np.all(sol.trajectory.points[:, 0] == 0.0)
    assert sol.trajectory.points[-1, 1] == pytest.approx(0.8, abs=1e-12)


def test_ivp_speed_conservation():
    field = make_constant_curvature(1.0)
    rng = np.random.default_rng(6)
    for _ in range(3):
        p = rng.uniform(-0.3, 0.3, 2)
        v = rng.normal(size=2)
        v /= math.sqrt(field.norm2(p, v))
        sol = geodesic_ivp(field, p, v, 1.0, 1e-3)
        assert sol.exit_reason == "reached-time"
        assert np.max(np.abs(sol.speeds - 1.0)) <= 1e-6
    # the integrated geodesic realises the model distance between its ends
    assert model_plane_distance(1.0, p, sol.trajectory.points[-1]) == pytest.approx(1.0, abs=1e-6)


def test_ivp_boundary_exit_and_errors():
    sol = geodesic_ivp(make_hw1(1.5), (0.5, 0), (1, 0), 2.0, 1e-2)
    assert sol.exit_reason == "hit-boundary"
    assert np.all(np.abs(sol.trajectory.points) < 1)
    with pytest.raises(DomainError):
        geodesic_ivp(flat(), (0, 0), (1, 0), 1.0, 0.2)
    with pytest.raises(BoundaryError):
        geodesic_ivp(flat(), (1.0, 0), (1, 0), 1.0, 0.01)


def test_bvp_flat_single_solution():
    sols = geodesic_bvp(flat(), (-0.3, 0.1), (0.4, 0.5), 8, seed=0)
    assert len(sols) == 1
    assert sols[0].length == pytest.approx(math.hypot(0.7, 0.4), abs=1e-9)
    assert sols[0].miss <= 1e-5


def test_bvp_hw2_two_mirror_solutions():
    sols = geodesic_bvp(make_hw2(1.5), (0, 0), (0, 0.5), 32, seed=0)
    assert len(sols) >= 2
    a, b = sols[0].trajectory.points, sols[1].trajectory.points
    assert np.allclose(a[:, 0], -b[:, 0], atol=1e-6) and np.allclose(a[:, 1], b[:, 1], atol=1e-6)
    assert np.max(np.abs(a[:, 0])) > 0
    for s in sols:
        assert np.hypot(*(s.trajectory.points[-1] - (0, 0.5))) <= 1e-5


def test_bvp_hw1_unique():
    sols = geodesic_bvp(make_hw1(1.5), (0, 0), (0.3, 0.3), 32, seed=0)
    assert len(sols) == 1
    assert sols[0].length == pytest.approx(hw1_distance(1.5, (0, 0), (0.3, 0.3)), rel=1e-6)


def test_bvp_determinism_and_errors():
    a = geodesic_bvp(make_hw2(1.5), (0, 0), (0, 0.5), 8, seed=3)
    b = geodesic_bvp(make_hw2(1.5), (0, 0), (0, 0.5), 8, seed=3)
    assert [s.length for s in a] == [s.length for s in b]
    with pytest.raises(DomainError):
        geodesic_bvp(flat(), (0, 0), (0.5, 0), 3, seed=0)
    with pytest.raises(BoundaryError):
        geodesic_bvp(flat(), (1.0, 0), (0.5, 0), 8, seed=0)


# ---------------------------------------------------------------- multiplicity


def test_multiplicity_flat():
    count, paths = minimizer_multiplicity(flat(), (-0.5, 0.0), (0.5, 0.2), 65)
    assert count == 1
    assert paths[0].length == pytest.approx(math.hypot(1.0, 0.2), rel=1e-6)


def test_multiplicity_hw2_mirror_pair():
    count, paths = minimizer_multiplicity(make_hw2(1.5), (0, 0), (0, 0.5), 401)
    assert count == 2
    a, b = paths[0].points, paths[1].points
    assert np.sign(a[len(a) // 2, 0]) == -np.sign(b[len(b) // 2, 0])
    assert np.allclose(a[:, 0], -b[:, 0], atol=1e-5)
    assert np.allclose(a[:, 1], b[:, 1], atol=1e-5)
    assert paths[0].length == pytest.approx(paths[1].length, rel=1e-8)
    assert paths[0].length < 0.5


def test_multiplicity_hw2_needs_cells_below_the_bow():
    # the minimizers bow ~4.4e-4 off the axis; two cells of a 101 grid are wider
    count, paths = minimizer_multiplicity(make_hw2(1.5), (0, 0), (0, 0.5), 101)
    assert count == 1
    assert paths[0].length < 0.5


def test_multiplicity_hw1_axis():
    count, paths = minimizer_multiplicity(make_hw1(1.5), (0, -0.4), (0, 0.4), 201)
    assert count == 1
    cell = 0.8 * 1.2 / 200
    assert np.max(np.abs(paths[0].points[:, 0])) <= cell
    assert paths[0].length == pytest.approx(0.8, abs=1e-9)


def test_multiplicity_coincident():
    assert minimizer_multiplicity(flat(), (0.1, 0.1), (0.1, 0.1), 64)[0] == 1


def test_polyline_mirror():
    line = Polyline(np.array([[0.1, 0.0], [0.3, 1.0]]), 1.0)
    m = line.mirrored(0.0)
    assert np.array_equal(m.points[:, 0], [-0.1, -0.3]) and m.length == 1.0
    assert len(m) == 2


def test_polyline_lengths_batch():
    X = np.array([straight((0, 0), (0.3, 0.4), 5), straight((0, 0), (0.6, 0.8), 5)])
    assert np.allclose(polyline_lengths(flat(), X), [0.5, 1.0])
