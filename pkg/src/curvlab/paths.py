"""Lengths, distances and geodesics for chart metrics.

Distances are certified from above: a shortest path in a weighted grid graph
(scipy's Dijkstra) seeds a polyline that is then shortened by red-black
coordinate descent.  Geodesics are integrated with classical RK4; two-point
problems are solved by damped Newton shooting from many initial directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import trapezoid
from scipy.sparse.csgraph import dijkstra
from scipy.spatial.distance import directed_hausdorff

from .curvature import DEFAULT_STEP, christoffel
from .errors import BoundaryError, DomainError
from .metrics import MetricField, Rect

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_IN_DOMAIN_TOL = 1e-12


@dataclass
class Polyline:
    """Ordered chart points and their metric length."""

    points: np.ndarray
    length: float

    def __len__(self):
        return len(self.points)

    def mirrored(self, axis_x: float) -> "Polyline":
        pts = self.points.copy()
        pts[:, 0] = 2 * axis_x - pts[:, 0]
        return Polyline(pts, self.length)


@dataclass
class GeodesicSolution:
    initial_point: np.ndarray
    initial_velocity: np.ndarray
    step: float
    trajectory: Polyline
    exit_reason: str  # "reached-time" or "hit-boundary"
    times: np.ndarray = dc_field(default=None, repr=False)
    speeds: np.ndarray = dc_field(default=None, repr=False)
    miss: float = 0.0

    @property
    def length(self) -> float:
        return self.trajectory.length


# ---------------------------------------------------------------- lengths


def _seg_speed(g, d):
    return np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", d, g, d), 0.0))


def segment_lengths(field: MetricField, a, b, subdivisions: int = 1):
    """Trapezoid-rule metric length of straight chart segments a -> b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    m = int(subdivisions)
    t = np.linspace(0.0, 1.0, m + 1)
    pts = a[..., None, :] + t[:, None] * d[..., None, :]
    sp = _seg_speed(field(pts), d[..., None, :])
    w = np.full(m + 1, 1.0 / m)
    w[0] = w[-1] = 0.5 / m
    return sp @ w


def polyline_lengths(field: MetricField, pts, subdivisions: int = 1):
    """Lengths of polylines with shape (..., n, 2)."""
    pts = np.asarray(pts, dtype=float)
    return segment_lengths(field, pts[..., :-1, :], pts[..., 1:, :], subdivisions).sum(axis=-1)


def _check_inside(field: MetricField, pts):
    if not np.all(field.domain.contains(pts, tol=_IN_DOMAIN_TOL * (1 + field.domain.width))):
        raise DomainError(f"points outside the chart {field.domain}")


def curve_length(field: MetricField, pts, subdivisions: int = 1) -> float:
    """Sum over segments of the trapezoid-rule integral of sqrt(g(c', c')).

    Raises:
        DomainError: a point is outside the chart or fewer than two points given.
    """
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise DomainError("a curve needs at least two points")
    _check_inside(field, pts)
    return float(polyline_lengths(field, pts, subdivisions))


# ---------------------------------------------------------------- grid graph


_OFFSETS_8 = [(1, 0), (0, 1), (1, 1), (1, -1)]
_OFFSETS_16 = _OFFSETS_8 + [(1, 2), (2, 1), (1, -2), (2, -1)]


class GridGraph:
    """Undirected lattice graph over a chart window with metric edge weights.

    Query points that are not lattice nodes are attached as terminal nodes
    linked to every lattice node within two cells.
    """

    def __init__(self, field: MetricField, window: Rect, resolution: int, neighborhood: int = 16):
        if resolution < 2:
            raise DomainError("grid resolution must be at least 2")
        if neighborhood not in (8, 16):
            raise DomainError("neighborhood must be 8 or 16")
        if not field.domain.contains_rect(window):
            raise DomainError(f"window {window} exceeds the chart {field.domain}")
        self.field = field
        self.window = window
        self.nx = self.ny = int(resolution)
        self.xs, self.ys = window.grid(self.nx, self.ny)
        self.hx = self.xs[1] - self.xs[0]
        self.hy = self.ys[1] - self.ys[0]
        self.offsets = _OFFSETS_16 if neighborhood == 16 else _OFFSETS_8
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        self.nodes = np.stack([X.ravel(), Y.ravel()], axis=-1)
        rows, cols, wts = [], [], []
        ids = np.arange(self.nx * self.ny).reshape(self.nx, self.ny)
        for di, dj in self.offsets:
            i0, i1 = max(0, -di), self.nx - max(0, di)
            j0, j1 = max(0, -dj), self.ny - max(0, dj)
            a = ids[i0:i1, j0:j1].ravel()
            b = ids[i0 + di : i1 + di, j0 + dj : j1 + dj].ravel()
            rows.append(a)
            cols.append(b)
            wts.append(segment_lengths(field, self.nodes[a], self.nodes[b], subdivisions=2))
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)
        self._wts = np.concatenate(wts)

    @property
    def cell(self) -> float:
        """The finer of the two lattice spacings."""
        return float(min(self.hx, self.hy))

    def _attach(self, terminals: np.ndarray):
        n = self.nx * self.ny
        rows, cols, wts = [self._rows], [self._cols], [self._wts]
        for t, pt in enumerate(terminals):
            i = int(np.clip(np.floor((pt[0] - self.xs[0]) / self.hx), 0, self.nx - 2))
            j = int(np.clip(np.floor((pt[1] - self.ys[0]) / self.hy), 0, self.ny - 2))
            ii = np.arange(max(0, i - 1), min(self.nx, i + 3))
            jj = np.arange(max(0, j - 1), min(self.ny, j + 3))
            nb = (ii[:, None] * self.ny + jj[None, :]).ravel()
            rows.append(np.full(len(nb), n + t))
            cols.append(nb)
            wts.append(segment_lengths(self.field, np.broadcast_to(pt, (len(nb), 2)), self.nodes[nb], subdivisions=2))
        m = n + len(terminals)
        w = np.concatenate(wts)
        # zero-length edges would vanish from the sparse matrix
        w = np.where(w > 0, w, 1e-300)
        graph = sparse.coo_matrix((w, (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)).tocsr()
        coords = np.vstack([self.nodes, terminals])
        return graph, coords

    def shortest_paths(self, P, Q, chunk: int = 128):
        """Lattice shortest paths between paired points; returns (lengths, list of (n_i, 2) arrays)."""
        P = np.asarray(P, dtype=float).reshape(-1, 2)
        Q = np.asarray(Q, dtype=float).reshape(-1, 2)
        if not (np.all(self.window.contains(P, 1e-12)) and np.all(self.window.contains(Q, 1e-12))):
            raise DomainError(f"query points must lie in the grid window {self.window}")
        terms, inv = np.unique(np.vstack([P, Q]), axis=0, return_inverse=True)
        inv = inv.ravel()
        src, dst = inv[: len(P)], inv[len(P) :]
        graph, coords = self._attach(terms)
        n = self.nx * self.ny
        lengths = np.zeros(len(P))
        paths: List[np.ndarray] = [None] * len(P)
        uniq_src = np.unique(src)
        for c0 in range(0, len(uniq_src), chunk):
            block = uniq_src[c0 : c0 + chunk]
            dist, pred = dijkstra(graph, directed=False, indices=n + block, return_predecessors=True)
            row_of = {s: r for r, s in enumerate(block)}
            for idx in np.flatnonzero(np.isin(src, block)):
                r = row_of[src[idx]]
                s_node, t_node = n + src[idx], n + dst[idx]
                if s_node == t_node:
                    paths[idx] = np.vstack([P[idx], Q[idx]])
                    lengths[idx] = 0.0
                    continue
                if not np.isfinite(dist[r, t_node]):
                    raise DomainError("grid graph is disconnected")
                seq = [t_node]
                while seq[-1] != s_node:
                    seq.append(pred[r, seq[-1]])
                pts = coords[np.array(seq[::-1])]
                pts[0], pts[-1] = P[idx], Q[idx]
                paths[idx] = pts
                lengths[idx] = dist[r, t_node]
        return lengths, paths


def grid_distance(
    field: MetricField, p, q, resolution: int, neighborhood: int = 16, window: Optional[Rect] = None
) -> Tuple[float, Polyline]:
    """Upper bound on d_g(p, q) from a shortest path in the weighted grid graph.

    Edge weights are metric lengths of the straight chart segments between
    lattice nodes (8- or 16-neighborhoods); p and q are attached as extra
    nodes.
    """
    if resolution < 32:
        raise DomainError("grid_distance needs resolution >= 32")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_inside(field, np.vstack([p, q]))
    if np.array_equal(p, q):
        return 0.0, Polyline(np.vstack([p, q]), 0.0)
    graph = GridGraph(field, window or field.domain, resolution, neighborhood)
    lengths, paths = graph.shortest_paths(p[None], q[None])
    return float(lengths[0]), Polyline(paths[0], float(lengths[0]))


# ---------------------------------------------------------------- refinement


def resample(points, n_segments: int) -> np.ndarray:
    """Resample a polyline to ``n_segments`` pieces equally spaced in chart arc length."""
    pts = np.asarray(points, dtype=float)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return np.repeat(pts[:1], n_segments + 1, axis=0)
    t = np.linspace(0.0, s[-1], n_segments + 1)
    out = np.stack([np.interp(t, s, pts[:, 0]), np.interp(t, s, pts[:, 1])], axis=-1)
    out[0], out[-1] = pts[0], pts[-1]
    return out


def _subdivide(X):
    mid = 0.5 * (X[:, :-1] + X[:, 1:])
    out = np.empty((X.shape[0], 2 * X.shape[1] - 1, 2))
    out[:, ::2] = X
    out[:, 1::2] = mid
    return out


def _sweep(field: MetricField, X, bounds: Rect, line_iters: int):
    """One red-black coordinate-descent sweep over interior vertices of a batch (B, n, 2)."""
    n = X.shape[1]
    for start in (1, 2):
        idx = np.arange(start, n - 1, 2)
        if len(idx) == 0:
            continue
        prev, cur, nxt = X[:, idx - 1], X[:, idx], X[:, idx + 1]
        g_prev, g_next = field(prev), field(nxt)

        def cost(v):
            g_v = field(v)
            d1, d2 = v - prev, nxt - v
            return 0.5 * (_seg_speed(g_prev, d1) + _seg_speed(g_v, d1) + _seg_speed(g_v, d2) + _seg_speed(g_next, d2))

        chord = nxt - prev
        clen = np.hypot(chord[..., 0], chord[..., 1])
        safe = np.where(clen > 0, clen, 1.0)[..., None]
        tangent = np.where(clen[..., None] > 0, chord / safe, np.array([1.0, 0.0]))
        normal = np.stack([-tangent[..., 1], tangent[..., 0]], axis=-1)
        mid = 0.5 * (prev + nxt)
        off = np.hypot(*(cur - mid).T).T
        best = cost(cur)
        # search only the perpendicular bisector of the neighbour chord: this keeps
        # vertices evenly spread, so the optimizer cannot exploit quadrature error
        # by parking long segments across regions of large metric
        half = 1.5 * off + 0.25 * clen
        lo, hi = -half, half.copy()
        c = hi - GOLDEN * (hi - lo)
        d = lo + GOLDEN * (hi - lo)
        fc = cost(bounds.clamp(mid + c[..., None] * normal))
        fd = cost(bounds.clamp(mid + d[..., None] * normal))
        for _ in range(line_iters):
            left = fc < fd
            hi = np.where(left, d, hi)
            lo = np.where(left, lo, c)
            new_c = hi - GOLDEN * (hi - lo)
            new_d = lo + GOLDEN * (hi - lo)
            # golden section reuses one interior point per iteration
            c, d = np.where(left, new_c, d), np.where(left, c, new_d)
            fcd = np.where(left, fc, fd)
            probe = np.where(left, c, d)
            fprobe = cost(bounds.clamp(mid + probe[..., None] * normal))
            fc, fd = np.where(left, fprobe, fcd), np.where(left, fcd, fprobe)
        cand = bounds.clamp(mid + (0.5 * (lo + hi))[..., None] * normal)
        fcand = cost(cand)
        # the chord midpoint wins ties, so straight stretches stay put exactly
        at_mid = bounds.clamp(mid)
        fmid = cost(at_mid)
        use_mid = fmid <= fcand
        cand = np.where(use_mid[..., None], at_mid, cand)
        fcand = np.where(use_mid, fmid, fcand)
        take = fcand <= best
        cur = np.where(take[..., None], cand, cur)
        X[:, idx] = cur
    return X


def refine_batch(
    field: MetricField,
    X,
    iterations: int,
    bounds: Optional[Rect] = None,
    line_iters: int = 40,
    rtol: float = 0.0,
):
    """Coordinate-descent shortening of a batch of polylines (B, n, 2) with fixed endpoints.

    Stops early once no length changes by more than ``rtol`` (relative)
    during a sweep.  Returns the refined batch and its lengths.
    """
    X = np.array(X, dtype=float, copy=True)
    bounds = bounds or field.domain
    length = polyline_lengths(field, X)
    # each path stops on its own so results do not depend on the batch
    active = np.ones(len(X), dtype=bool)
    for _ in range(int(iterations)):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        X[idx] = _sweep(field, X[idx], bounds, line_iters)
        new = polyline_lengths(field, X[idx])
        if rtol > 0:
            active[idx] = length[idx] - new > rtol * np.maximum(new, 1e-300)
        length[idx] = new
    return X, length


def refine_path(
    field: MetricField,
    path,
    iterations: int,
    subdivide: int = 0,
    line_iters: int = 40,
    bounds: Optional[Rect] = None,
) -> Polyline:
    """Shorten a polyline by golden-section coordinate descent on its interior vertices.

    Each sweep moves every interior vertex (odd then even indices) to the
    minimizer of its two adjacent segment lengths along the perpendicular
    bisector of its neighbours; a move is kept unless it lengthens.  With
    ``subdivide > 0`` the path is midpoint-subdivided that many times, with
    ``iterations`` sweeps after each subdivision.  Endpoints never move and
    vertices are clamped to the chart.
    """
    if iterations < 1:
        raise DomainError("refine_path needs at least one iteration")
    pts = path.points if isinstance(path, Polyline) else np.asarray(path, dtype=float)
    _check_inside(field, pts)
    X = pts[None].copy()
    X, length = refine_batch(field, X, iterations, bounds, line_iters)
    for _ in range(int(subdivide)):
        X, length = refine_batch(field, _subdivide(X), iterations, bounds, line_iters)
    return Polyline(X[0], float(length[0]))


def multilevel_refine(field, X, levels: int, sweeps: int = 60, bounds=None, line_iters: int = 40, rtol=1e-13):
    """Nested refinement: shorten, subdivide, shorten again.  Returns (X, lengths, last change)."""
    X, length = refine_batch(field, X, sweeps, bounds, line_iters, rtol)
    change = np.zeros_like(length)
    for _ in range(int(levels)):
        X, new = refine_batch(field, _subdivide(X), sweeps, bounds, line_iters, rtol)
        change = np.abs(length - new)
        length = new
    return X, length, change


# ---------------------------------------------------------------- distances


def pairwise_distances(
    field: MetricField,
    P,
    Q,
    method: str = "refine",
    resolution: int = 65,
    window: Optional[Rect] = None,
    refine_levels: int = 3,
    base_segments: int = 8,
    steps: int = 64,
):
    """Distances d(P[i], Q[i]) with an error estimate for each.

    ``refine``: grid Dijkstra seeds, resampled and multilevel-refined; the
    error is the change made by the last refinement level.  ``shoot``:
    Newton shooting from the straight chart segment; only valid inside
    small convex balls of smooth metrics; the error is the step-halving
    difference.  Coincident pairs get distance 0.
    """
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    Q = np.asarray(Q, dtype=float).reshape(-1, 2)
    d = np.zeros(len(P))
    err = np.zeros(len(P))
    live = ~np.all(P == Q, axis=-1)
    if not np.any(live):
        return d, err
    if method == "shoot":
        d[live], err[live] = _shoot_distances(field, P[live], Q[live], steps)
        return d, err
    if method != "refine":
        raise DomainError(f"unknown distance method {method!r}")
    window = window or field.domain
    graph = GridGraph(field, window, resolution)
    lat, paths = graph.shortest_paths(P[live], Q[live])
    X = np.stack([resample(p, base_segments) for p in paths])
    X, length, change = multilevel_refine(field, X, refine_levels, bounds=window)
    d[live] = np.minimum(length, lat)
    err[live] = change
    return d, err


# ---------------------------------------------------------------- geodesics


def _accel(field: MetricField, X, V, h: float):
    gam = christoffel(field, X, h)
    return -np.einsum("...ijk,...j,...k->...i", gam, V, V)


def _reach(field: MetricField, h: float) -> float:
    return 0.0 if field.derivatives is not None else h


def _inside(field: MetricField, X, h):
    r = _reach(field, h)
    dist = field.domain.boundary_distance(X)
    return dist >= r if r > 0 else dist > 0


def _rk4_batch(field: MetricField, X0, V0, steps: int, dt: float = None, h: float = DEFAULT_STEP):
    """Integrate the geodesic equation for unit time (or ``steps*dt``); dead rows become NaN."""
    X = np.array(X0, dtype=float, copy=True)
    V = np.array(V0, dtype=float, copy=True)
    dt = 1.0 / steps if dt is None else dt
    alive = np.ones(len(X), dtype=bool)

    def acc(x, v, mask):
        ok = _inside(field, x, h) & mask
        a = np.zeros_like(x)
        if np.any(ok):
            a[ok] = _accel(field, x[ok], v[ok], h)
        return a, ok

    for _ in range(steps):
        k1v, alive = acc(X, V, alive)
        k1x = V
        k2v, alive = acc(X + 0.5 * dt * k1x, V + 0.5 * dt * k1v, alive)
        k2x = V + 0.5 * dt * k1v
        k3v, alive = acc(X + 0.5 * dt * k2x, V + 0.5 * dt * k2v, alive)
        k3x = V + 0.5 * dt * k2v
        k4v, alive = acc(X + dt * k3x, V + dt * k3v, alive)
        k4x = V + dt * k3v
        X = np.where(alive[:, None], X + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x), X)
        V = np.where(alive[:, None], V + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v), V)
        alive &= _inside(field, X, h)
    X[~alive] = np.nan
    return X, V, alive


def geodesic_ivp(field: MetricField, p, v, t_max: float, dt: float, h: float = DEFAULT_STEP) -> GeodesicSolution:
    """Integrate c'' = -G(c)(c', c') with classical RK4 from (p, v).

    Integration stops (exit reason ``hit-boundary``) before any stage would
    leave the chart.  On the singular line of a C^1 metric the initial-value
    problem may have several solutions; this integrator follows the one
    selected by the limiting Christoffel symbols (the symmetric one for the
    Hartman-Wintner examples).
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if not dt <= t_max / 10:
        raise DomainError("geodesic_ivp needs dt <= t_max / 10")
    if not np.all(_inside(field, p, h)):
        raise BoundaryError("initial point is not interior")
    n = int(math.ceil(t_max / dt - 1e-9))
    steps = np.full(n, dt)
    steps[-1] = t_max - dt * (n - 1)
    X, V = p[None].copy(), v[None].copy()
    traj, times, speeds = [p.copy()], [0.0], [math.sqrt(field.norm2(p, v))]
    reason = "reached-time"
    t = 0.0
    for s in steps:
        Xn, Vn, alive = _rk4_batch(field, X, V, 1, dt=s, h=h)
        if not alive[0]:
            reason = "hit-boundary"
            break
        X, V = Xn, Vn
        t += s
        traj.append(X[0].copy())
        times.append(t)
        speeds.append(math.sqrt(field.norm2(X[0], V[0])))
    pts = np.array(traj)
    length = float(trapezoid(speeds, times)) if len(times) > 1 else 0.0
    return GeodesicSolution(p, v, dt, Polyline(pts, length), reason, np.array(times), np.array(speeds))


def _shoot(field, P, Q, W0, steps, h=DEFAULT_STEP, max_iter=60, tol=1e-12):
    """Damped Newton on the endpoint miss exp_p(w) - q for a batch; returns (W, miss norms)."""
    W = np.array(W0, dtype=float, copy=True)
    scale = np.maximum(np.hypot(*(Q - P).T), 1e-12)

    def miss(Pb, Wb, Qb):
        X, _, ok = _rk4_batch(field, Pb, Wb, steps, h=h)
        return X - Qb, ok

    F, ok = miss(P, W, Q)
    norm = np.where(ok, np.hypot(*F.T), np.inf)
    for _ in range(max_iter):
        act = np.flatnonzero(norm > tol * scale)
        if len(act) == 0:
            break
        Pa, Qa, Wa, Fa = P[act], Q[act], W[act], F[act]
        delta = 1e-7 * np.maximum(np.hypot(*Wa.T), 1e-3)
        J = np.empty((len(act), 2, 2))
        for k in range(2):
            Wk = Wa.copy()
            Wk[:, k] += delta
            Fk, okk = miss(Pa, Wk, Qa)
            J[:, :, k] = (Fk - Fa) / delta[:, None]
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        good = np.isfinite(det) & (np.abs(det) > 1e-300) & np.all(np.isfinite(Fa), axis=-1)
        step = np.zeros_like(Wa)
        if np.any(good):
            step[good] = -np.linalg.solve(J[good], Fa[good][..., None])[..., 0]
        # clamp the Newton step relative to the current shooting vector
        cap = 0.5 * np.maximum(np.hypot(*Wa.T), scale[act])
        sn = np.hypot(*step.T)
        step *= np.minimum(1.0, cap / np.maximum(sn, 1e-300))[:, None]
        alpha = np.ones(len(act))
        pending = good.copy()
        newW = Wa.copy()
        newF = Fa.copy()
        newN = norm[act].copy()
        for _ in range(12):
            idx = np.flatnonzero(pending)
            if len(idx) == 0:
                break
            trial = Wa[idx] + alpha[idx, None] * step[idx]
            Ft, okt = miss(Pa[idx], trial, Qa[idx])
            nt = np.where(okt, np.hypot(*Ft.T), np.inf)
            better = nt < norm[act][idx]
            acc = idx[better]
            newW[acc], newF[acc], newN[acc] = trial[better], Ft[better], nt[better]
            pending[acc] = False
            alpha[idx[~better]] *= 0.5
        stalled = pending | ~good
        W[act], F[act], norm[act] = newW, newF, newN
        norm[act[stalled]] = np.where(norm[act[stalled]] <= tol * scale[act[stalled]], norm[act[stalled]], np.inf)
        if np.all(~np.isfinite(norm[act])):
            break
    return W, norm


def _shoot_distances(field, P, Q, steps):
    W0 = Q - P
    W, norm = _shoot(field, P, Q, W0, steps)
    d = np.sqrt(np.maximum(field.norm2(P, W), 0.0))
    W2, norm2 = _shoot(field, P, Q, W, 2 * steps)
    d2 = np.sqrt(np.maximum(field.norm2(P, W2), 0.0))
    bad = ~(np.isfinite(norm) & np.isfinite(norm2))
    if np.any(bad):
        raise DomainError(f"shooting failed for {int(bad.sum())} pairs; use method='refine'")
    return d2, np.abs(d2 - d) + norm2 * np.sqrt(np.abs(np.linalg.eigvalsh(field(Q))).max(axis=-1))


def geodesic_bvp(
    field: MetricField,
    p,
    q,
    n_starts: int,
    seed: int,
    steps: int = 100,
    h: float = DEFAULT_STEP,
    angle_tol: float = 1e-3,
    hit_tol: float = 1e-5,
) -> List[GeodesicSolution]:
    """Geodesics from p to q by multiple shooting.

    Initial directions are stratified on the circle (jitter drawn from
    ``seed``); each is corrected by damped Newton with clamped steps.
    Converged solutions (end point within ``hit_tol`` of q) are clustered by
    initial angle; one representative per cluster is returned, shortest
    first.  Returns an empty list when nothing converges.
    """
    from ._rng import rng_for

    if n_starts < 4:
        raise DomainError("geodesic_bvp needs n_starts >= 4")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not (np.all(_inside(field, p, h)) and np.all(_inside(field, q, h))):
        raise BoundaryError("endpoints must be interior")
    rng = rng_for(seed, "geodesic_bvp")
    theta = 2 * np.pi * (np.arange(n_starts) + rng.random(n_starts)) / n_starts
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    g = field(p)
    L0 = math.sqrt(max(float((q - p) @ g @ (q - p)), 1e-24))
    W0 = dirs * (L0 / np.sqrt(np.einsum("bi,ij,bj->b", dirs, g, dirs)))[:, None]
    P = np.broadcast_to(p, W0.shape).copy()
    Q = np.broadcast_to(q, W0.shape).copy()
    W, norm = _shoot(field, P, Q, W0, steps, h)
    conv = np.flatnonzero(np.isfinite(norm) & (norm <= hit_tol))
    if len(conv) == 0:
        return []
    ang = np.arctan2(W[conv, 1], W[conv, 0])
    order = np.argsort(norm[conv])
    reps: List[int] = []
    for o in order:
        a = ang[o]
        if all(abs((a - ang[r] + np.pi) % (2 * np.pi) - np.pi) > angle_tol for r in reps):
            reps.append(o)
    sols = []
    for r in reps:
        i = conv[r]
        sol = geodesic_ivp(field, p, W[i], 1.0, 1.0 / steps, h)
        sol.miss = float(norm[i])
        sols.append(sol)
    sols.sort(key=lambda s: s.length)
    return sols


# ---------------------------------------------------------------- multiplicity


def _reflect(points, p, q):
    """Reflect chart points across the line through p and q."""
    u = (q - p) / np.hypot(*(q - p))
    rel = points - p
    along = rel @ u
    return p + 2 * along[:, None] * u - rel


def minimizer_multiplicity(
    field: MetricField,
    p,
    q,
    resolution: int,
    window: Optional[Rect] = None,
    length_window: float = 0.005,
    separation_cells: float = 2.0,
    base_segments: int = 16,
    levels: int = 3,
    sweeps: int = 200,
    bow_cells: float = 3.0,
) -> Tuple[int, List[Polyline]]:
    """Count distinct near-minimal paths from p to q.

    Seeds: the lattice shortest path and, when p and q share their first
    coordinate, its x-mirror, each bowed by ``bow_cells`` cells to either
    side of the chord (a straight seed would sit on a stationary point of the
    descent).  Each seed is refined; paths within ``length_window`` (relative) of the
    shortest are kept greedily, shortest first, if their Hausdorff distance
    to every kept path exceeds ``separation_cells`` lattice cells.

    The default window is the bounding box of p and q padded by 10% of
    their chart separation, clipped to the chart.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_inside(field, np.vstack([p, q]))
    if np.array_equal(p, q):
        return 1, [Polyline(np.vstack([p, q]), 0.0)]
    if window is None:
        pad = 0.1 * float(np.hypot(*(q - p)))
        d = field.domain
        window = Rect(
            max(d.x0, min(p[0], q[0]) - pad),
            min(d.x1, max(p[0], q[0]) + pad),
            max(d.y0, min(p[1], q[1]) - pad),
            min(d.y1, max(p[1], q[1]) + pad),
        )
    graph = GridGraph(field, window, resolution)
    _, lattice = graph.shortest_paths(p[None], q[None])
    base = resample(lattice[0], base_segments)
    u = (q - p) / np.hypot(*(q - p))
    normal = np.array([-u[1], u[0]])
    bump = np.sin(np.linspace(0.0, np.pi, base_segments + 1))[:, None] * normal
    amp = bow_cells * graph.cell
    # the straight chord is stationary for coordinate descent, so every seed is bowed
    seeds = [base + amp * bump, base - amp * bump]
    if p[0] == q[0]:
        mirror = _reflect(base, p, q)
        seeds += [mirror + amp * bump, mirror - amp * bump]
    X = np.stack([window.clamp(s) for s in seeds])
    X[:, 0], X[:, -1] = p, q
    X, length, _ = multilevel_refine(field, X, levels, sweeps=sweeps, bounds=window, line_iters=50)
    best = float(length.min())
    kept: List[int] = []
    sep = separation_cells * graph.cell
    for i in np.argsort(length, kind="stable"):
        if length[i] > best * (1 + length_window):
            continue
        if all(_hausdorff(X[i], X[j]) > sep for j in kept):
            kept.append(int(i))
    return len(kept), [Polyline(X[i], float(length[i])) for i in kept]


def _hausdorff(a, b, n: int = 400):
    a = resample(a, n)
    b = resample(b, n)
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])
