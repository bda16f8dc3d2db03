"""Synthetic curvature bounds tested on sampled quadruples.

A distance oracle returns d(P[i], Q[i]) for paired point arrays together with
an error bound.  Verdicts are computed in batches from the six pairwise
distances of each quadruple using the model angles of ``curvlab.model``.

Conventions for degenerate quadruples:

* CBB: a zero opposite side with positive adjacent sides gives angle 0; if
  the base point coincides with one of the others the quadruple passes and
  every angle at that point is set to 0.
* CAT: an angle with a zero adjacent side is undefined, so the quadruple
  passes through the "some angle undefined" clause, as do quadruples where
  any of the six model triangles is inadmissible.  Their slack is NaN.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import List, Optional

import numpy as np

from ._rng import rng_for
from .errors import DomainError
from .metrics import MetricField, Rect, constant_curvature_domain, nondegeneracy_scan
from .model import SERIES_K, TRIANGLE_ATOL, diameter, model_angle_array

ANGLE_TOL = 1e-7
COINCIDENT = 1e-12
MIN_SEPARATION = 1e-4
BISECTION_RTOL = 1e-2
CRITICAL_RTOL = 1e-3


def worker_count() -> int:
    """Worker cap from CURVLAB_THREADS (default 1)."""
    raw = os.environ.get("CURVLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"CURVLAB_THREADS must be an integer, got {raw!r}")
    return max(1, n)


# ---------------------------------------------------------------- oracles


class DistanceOracle:
    """Symmetric distance on a chart region.

    Subclasses implement ``_distance`` and may override ``boundary_distance``
    and ``ball_points``.
    """

    region: Rect

    def distance(self, P, Q):
        """Distances and error bounds for paired points; both arrays shaped like P[..., 0]."""
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        shape = P.shape[:-1]
        P2, Q2 = P.reshape(-1, 2), Q.reshape(-1, 2)
        if not (np.all(self.region.contains(P2, 1e-12)) and np.all(self.region.contains(Q2, 1e-12))):
            raise DomainError(f"points outside the oracle region {self.region}")
        d, err = self._distance(P2, Q2)
        return d.reshape(shape), err.reshape(shape)

    def _distance(self, P, Q):
        raise NotImplementedError

    def boundary_distance(self, p) -> float:
        raise NotImplementedError

    def max_radius(self, p) -> float:
        """Localization cap: a third of the distance from p to the region boundary."""
        return self.boundary_distance(np.asarray(p, dtype=float)) / 3.0

    def ball_points(self, p, r: float, u, theta):
        """Points of B_r(p) from unit-square variates (u, theta in [0, 2pi)); monotone in r."""
        raise NotImplementedError


def _complex(P):
    return P[..., 0] + 1j * P[..., 1]


class ModelOracle(DistanceOracle):
    """Exact distances of M^2(k) in the stereographic chart 4/(1 + k|z|^2)^2 (identity for k = 0)."""

    def __init__(self, k: float, region: Optional[Rect] = None):
        self.k = float(k)
        self.region = region or constant_curvature_domain(self.k)
        if self.k != 0 and not constant_curvature_domain(self.k).contains_rect(self.region):
            raise DomainError(f"region {self.region} leaves the model chart")
        self.name = "flat" if self.k == 0 else f"constk({self.k:g})"

    def _scaled(self, P):
        return math.sqrt(abs(self.k)) * _complex(P)

    def _distance(self, P, Q):
        k = self.k
        if abs(k) < SERIES_K:
            d = np.hypot(*(P - Q).T)
            return d, np.zeros_like(d)
        u, w = self._scaled(P), self._scaled(Q)
        s = math.sqrt(abs(k))
        if k > 0:
            d = 2.0 * np.arctan2(np.abs(u - w), np.abs(1.0 + np.conj(u) * w)) / s
        else:
            d = 2.0 * np.arctanh(np.abs(u - w) / np.abs(1.0 - np.conj(u) * w)) / s
        return d, np.zeros_like(d)

    def boundary_distance(self, p) -> float:
        r = self.region
        n = 4096
        t = (np.arange(n) + 0.5) / n
        edges = np.concatenate(
            [
                np.stack([r.x0 + t * r.width, np.full(n, r.y0)], -1),
                np.stack([r.x0 + t * r.width, np.full(n, r.y1)], -1),
                np.stack([np.full(n, r.x0), r.y0 + t * r.height], -1),
                np.stack([np.full(n, r.x1), r.y0 + t * r.height], -1),
            ]
        )
        d, _ = self._distance(np.broadcast_to(p, edges.shape), edges)
        # subtract the sampling gap so the value stays a lower bound
        if self.k > 0:
            lam_max = 4.0
        elif self.k < 0:
            far2 = max(r.x0**2, r.x1**2) + max(r.y0**2, r.y1**2)
            lam_max = 4.0 / (1.0 + self.k * far2) ** 2
        else:
            lam_max = 1.0
        gap = 0.5 * max(r.width, r.height) / n * math.sqrt(lam_max)
        return max(0.0, float(d.min()) - gap)

    def ball_points(self, p, r: float, u, theta):
        """Geodesic polar coordinates about p with the exact area law of M^2(k)."""
        k = self.k
        u = np.asarray(u, dtype=float)
        if abs(k) < SERIES_K:
            rho = r * np.sqrt(u)
            return p + np.stack([rho * np.cos(theta), rho * np.sin(theta)], -1)
        s = math.sqrt(abs(k))
        if k > 0:
            t = np.arccos(1.0 - u * (1.0 - math.cos(s * r))) / s
            rho = np.tan(s * t / 2.0)
        else:
            t = np.arccosh(1.0 + u * (math.cosh(s * r) - 1.0)) / s
            rho = np.tanh(s * t / 2.0)
        z = rho * np.exp(1j * theta)
        a = s * complex(*p)
        w = (z + a) / (1.0 - np.conj(a) * z) if k > 0 else (z + a) / (1.0 + np.conj(a) * z)
        w = w / s
        return np.stack([w.real, w.imag], -1)


class MatrixOracle(DistanceOracle):
    """Distances given as a symmetric matrix over an explicit point set."""

    def __init__(self, points, matrix, error: float = 0.0):
        self.points = np.asarray(points, dtype=float)
        self.matrix = np.asarray(matrix, dtype=float)
        n = len(self.points)
        if self.matrix.shape != (n, n):
            raise DomainError("distance matrix must be n x n for n points")
        if not np.allclose(self.matrix, self.matrix.T, atol=1e-12) or np.any(np.diag(self.matrix) != 0):
            raise DomainError("distance matrix must be symmetric with zero diagonal")
        self.error = float(error)
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        pad = 1e-9 + 1e-9 * float(np.abs(self.points).max(initial=1.0))
        self.region = Rect(lo[0] - pad, hi[0] + pad, lo[1] - pad, hi[1] + pad)
        self._index = {tuple(pt): i for i, pt in enumerate(self.points)}

    def _lookup(self, P):
        try:
            return np.array([self._index[tuple(pt)] for pt in P], dtype=int)
        except KeyError as exc:
            raise DomainError(f"point {exc.args[0]} is not in the oracle point set")

    def _distance(self, P, Q):
        d = self.matrix[self._lookup(P), self._lookup(Q)]
        return d, np.full_like(d, self.error)


class PathOracle(DistanceOracle):
    """Distances of a metric field restricted to a chart region, computed by pathspace.

    ``refine`` gives refined grid paths; ``shoot`` gives geodesic shooting and
    is only sound inside small convex balls of smooth metrics.
    """

    def __init__(self, field: MetricField, region: Optional[Rect] = None, method: str = "refine", resolution: int = 65, refine_levels: int = 3):
        self.field = field
        self.region = region or field.domain
        if not field.domain.contains_rect(self.region):
            raise DomainError(f"region {self.region} leaves the chart {field.domain}")
        self.method = method
        self.resolution = resolution
        self.refine_levels = refine_levels
        self.name = field.name
        self.lam_min, self.lam_max = nondegeneracy_scan(field, 257, self.region)

    def _distance(self, P, Q):
        from .paths import pairwise_distances

        def job(sl):
            return pairwise_distances(
                self.field, P[sl], Q[sl], method=self.method, resolution=self.resolution,
                window=self.region, refine_levels=self.refine_levels,
            )

        workers = worker_count()
        if workers == 1 or len(P) < 2 * workers:
            return job(slice(None))
        bounds = np.linspace(0, len(P), workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, [slice(a, b) for a, b in zip(bounds, bounds[1:])]))
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def boundary_distance(self, p) -> float:
        # certified: every curve to the boundary is at least sqrt(lam_min) times its chart length
        return math.sqrt(self.lam_min) * float(self.region.boundary_distance(p))

    def ball_points(self, p, r: float, u, theta):
        """Points of the chart disk of radius r/sqrt(lam_max), which lies inside B_r(p)."""
        rho = r / math.sqrt(self.lam_max) * np.sqrt(np.asarray(u, dtype=float))
        return np.asarray(p, dtype=float) + np.stack([rho * np.cos(theta), rho * np.sin(theta)], -1)


def perimeter(oracle: DistanceOracle, x, y, z):
    """d(x, y) + d(y, z) + d(z, x)."""
    P = np.stack([x, y, z]).astype(float)
    Q = np.stack([y, z, x]).astype(float)
    d, _ = oracle.distance(P, Q)
    return float(d.sum()) if d.ndim == 1 else d.sum(axis=0)


# ---------------------------------------------------------------- verdicts


@dataclass
class ComparisonVerdict:
    quadruple: np.ndarray
    admissible: bool
    angles: tuple
    result: str  # "pass", "fail" or "inadmissible"
    slack: float
    slack_error: float = 0.0
    marginal: bool = False


# index pairs into the four points of a quadruple
_PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def _angle(k, opp, b, c, err):
    """Model angles with opposite sides pulled back onto the triangle inequality when within ``err``."""
    lo, hi = np.abs(b - c), b + c
    tol = err + TRIANGLE_ATOL * (1.0 + opp + b + c)
    near = ((opp < lo) & (opp >= lo - tol)) | ((opp > hi) & (opp <= hi + tol))
    opp = np.where(near, np.clip(opp, lo, hi), opp)
    return model_angle_array(k, opp, b, c)


def _cbb_core(k, D, E):
    """Angles, slack and flags for CBB; D, E are (n, 6) distances/errors in _PAIRS order."""
    a1, a2, a3, b12, b13, b23 = D.T
    e = E.T
    diam = diameter(k)
    per = np.stack([a1 + a2 + b12, a2 + a3 + b23, a3 + a1 + b13])
    admissible = np.all(per < 2 * diam - 1e-9 * diam if np.isfinite(diam) else True, axis=0)
    admissible = np.broadcast_to(admissible, a1.shape).copy()
    th12 = _angle(k, b12, a1, a2, e[3] + e[0] + e[1])
    th23 = _angle(k, b23, a2, a3, e[5] + e[1] + e[2])
    th31 = _angle(k, b13, a3, a1, e[4] + e[2] + e[0])
    coincide = np.stack([a1, a2, a3]) <= COINCIDENT
    on_p = np.any(coincide, axis=0)
    # angles at p involving a point that coincides with p are set to 0
    th12 = np.where(coincide[0] | coincide[1], 0.0, th12)
    th23 = np.where(coincide[1] | coincide[2], 0.0, th23)
    th31 = np.where(coincide[2] | coincide[0], 0.0, th31)
    angles = np.stack([th12, th23, th31], -1)
    slack = 2 * np.pi - angles.sum(-1)
    admissible &= ~np.any(np.isnan(angles), -1) | on_p
    return angles, slack, admissible, on_p


def _cat_core(k, D, E):
    """Angles and slack for CAT; quadruple order (p1, p2, x1, x2)."""
    p1p2, p1x1, p1x2, p2x1, p2x2, x1x2 = D.T
    e = E.T
    diam = diameter(k)
    A1 = _angle(k, x1x2, p1x1, p1x2, e[5] + e[1] + e[2])
    B1 = _angle(k, p2x1, p1p2, p1x1, e[3] + e[0] + e[1])
    C1 = _angle(k, p2x2, p1p2, p1x2, e[4] + e[0] + e[2])
    A2 = _angle(k, x1x2, p2x1, p2x2, e[5] + e[3] + e[4])
    B2 = _angle(k, p1x1, p1p2, p2x1, e[1] + e[0] + e[3])
    C2 = _angle(k, p1x2, p1p2, p2x2, e[2] + e[0] + e[4])
    angles = np.stack([A1, B1, C1, A2, B2, C2], -1)
    admissible = ~np.any(np.isnan(angles), -1)
    if np.isfinite(diam):
        pers = [p1x1 + p1x2 + x1x2, p1p2 + p1x1 + p2x1, p1p2 + p1x2 + p2x2, p2x1 + p2x2 + x1x2]
        admissible &= np.all(np.stack(pers) < 2 * diam - 1e-9 * diam, axis=0)
    slack = np.maximum(B1 + C1 - A1, B2 + C2 - A2)
    slack = np.where(admissible, slack, np.nan)
    return angles, slack, admissible


def _slack_error(core, k, D, E, slack):
    """First-order propagation: perturb each distance by its error bound in turn."""
    total = np.zeros(len(D))
    for j in range(6):
        if not np.any(E[:, j] > 0):
            continue
        for sign in (1.0, -1.0):
            Dj = D.copy()
            Dj[:, j] = np.maximum(Dj[:, j] + sign * E[:, j], 0.0)
            s = core(k, Dj, E)[1]
            diff = np.abs(np.nan_to_num(s - slack, nan=0.0))
            if sign > 0:
                best = diff
            else:
                best = np.maximum(best, diff)
        total += best
    return total


@dataclass
class VerdictBatch:
    """Verdicts for many quadruples of one mode and curvature."""

    mode: str
    k: float
    quadruples: np.ndarray
    admissible: np.ndarray
    angles: np.ndarray
    result: np.ndarray
    slack: np.ndarray
    slack_error: np.ndarray
    marginal: np.ndarray
    seed: Optional[int] = None
    meta: dict = dc_field(default_factory=dict)

    def __len__(self):
        return len(self.result)

    def __getitem__(self, i) -> ComparisonVerdict:
        return ComparisonVerdict(
            self.quadruples[i], bool(self.admissible[i]), tuple(float(a) for a in self.angles[i]),
            str(self.result[i]), float(self.slack[i]), float(self.slack_error[i]), bool(self.marginal[i]),
        )

    @property
    def failures(self) -> int:
        return int(np.sum(self.result == "fail"))

    def failures_excluding_marginal(self) -> int:
        return int(np.sum((self.result == "fail") & ~self.marginal))

    def summary(self) -> dict:
        decided = self.result != "inadmissible"
        finite = np.isfinite(self.slack)
        out = {
            "mode": self.mode,
            "k": self.k,
            "n": len(self),
            "seed": self.seed,
            "pass": int(np.sum(self.result == "pass")),
            "fail": self.failures,
            "inadmissible": int(np.sum(~decided)),
            "marginal": int(np.sum(self.marginal)),
            "pass_rate": float(np.mean(self.result == "pass")) if len(self) else 1.0,
            "min_slack": None,
            "min_slack_quadruple": None,
        }
        if np.any(finite):
            i = int(np.nanargmin(np.where(finite, self.slack, np.inf)))
            out["min_slack"] = float(self.slack[i])
            out["min_slack_quadruple"] = self.quadruples[i].tolist()
        out.update(self.meta)
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x0", "y0", "x1", "y1", "x2", "y2", "x3", "y3", "admissible", "result", "slack", "slack_error", "marginal"])
            for i in range(len(self)):
                q = self.quadruples[i].ravel()
                w.writerow([repr(float(v)) for v in q] + [int(self.admissible[i]), self.result[i], repr(float(self.slack[i])), repr(float(self.slack_error[i])), int(self.marginal[i])])

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def quadruple_distances(oracle: DistanceOracle, quads):
    """The six pairwise distances (and errors) of each quadruple, in _PAIRS order."""
    quads = np.asarray(quads, dtype=float)
    P = np.stack([quads[:, i] for i, _ in _PAIRS], 1)
    Q = np.stack([quads[:, j] for _, j in _PAIRS], 1)
    return oracle.distance(P, Q)


def verdicts_from_distances(mode: str, k: float, quads, D, E=None, seed=None) -> VerdictBatch:
    """Batch CBB or CAT verdicts from precomputed distances."""
    mode = mode.lower()
    D = np.asarray(D, dtype=float).reshape(-1, 6)
    E = np.zeros_like(D) if E is None else np.asarray(E, dtype=float).reshape(-1, 6)
    if mode == "cbb":
        angles, slack, admissible, on_p = _cbb_core(k, D, E)
        core = lambda kk, DD, EE: _cbb_core(kk, DD, EE)[:2]  # noqa: E731
        result = np.where(on_p, "pass", np.where(~admissible, "inadmissible", np.where(slack >= -ANGLE_TOL, "pass", "fail")))
    elif mode == "cat":
        angles, slack, admissible = _cat_core(k, D, E)
        core = lambda kk, DD, EE: _cat_core(kk, DD, EE)[:2]  # noqa: E731
        # an undefined angle is condition (iii): pass
        result = np.where(~admissible | (slack >= -ANGLE_TOL), "pass", "fail")
    else:
        raise DomainError(f"mode must be 'cbb' or 'cat', got {mode!r}")
    err = _slack_error(core, k, D, E, slack) if np.any(E > 0) else np.zeros(len(D))
    marginal = np.isfinite(slack) & (err > 0) & (np.abs(slack) < err)
    return VerdictBatch(mode, float(k), np.asarray(quads, dtype=float), admissible, angles, result.astype(object), slack, err, marginal, seed)


def cbb_batch(oracle: DistanceOracle, k: float, quads, seed=None) -> VerdictBatch:
    D, E = quadruple_distances(oracle, quads)
    return verdicts_from_distances("cbb", k, quads, D, E, seed)


def cat_batch(oracle: DistanceOracle, k: float, quads, seed=None) -> VerdictBatch:
    D, E = quadruple_distances(oracle, quads)
    return verdicts_from_distances("cat", k, quads, D, E, seed)


def cbb_quadruple(oracle: DistanceOracle, k: float, p, x1, x2, x3) -> ComparisonVerdict:
    """Angle-sum test at p: the three model angles between x1, x2, x3 seen from p sum to at most 2 pi."""
    return cbb_batch(oracle, k, np.array([[p, x1, x2, x3]], dtype=float))[0]


def cat_quadruple(oracle: DistanceOracle, k: float, p1, p2, x1, x2) -> ComparisonVerdict:
    """Quadruple test: the angle at p1 (or at p2) between x1, x2 is at most the sum through the other p."""
    return cat_batch(oracle, k, np.array([[p1, p2, x1, x2]], dtype=float))[0]


# ---------------------------------------------------------------- sampling


def sample_quadruples(region: Rect, n: int, seed: int, mode: str = "cbb") -> np.ndarray:
    """``n`` chart-uniform quadruples in ``region`` as an (n, 4, 2) array.

    Quadruples with two points closer than 1e-4 in the chart are redrawn.
    """
    if n < 1:
        raise DomainError("sample_quadruples needs n >= 1")
    rng = rng_for(seed, "quadruples", mode.lower())
    lo = np.array([region.x0, region.y0])
    span = np.array([region.width, region.height])
    out = lo + span * rng.random((n, 4, 2))
    while True:
        diff = out[:, :, None, :] - out[:, None, :, :]
        dist = np.where(np.eye(4, dtype=bool), np.inf, np.hypot(diff[..., 0], diff[..., 1]))
        bad = np.flatnonzero(dist.min(axis=(1, 2)) < MIN_SEPARATION)
        if len(bad) == 0:
            return out
        out[bad] = lo + span * rng.random((len(bad), 4, 2))


def _batch(mode):
    return cbb_batch if mode.lower() == "cbb" else cat_batch


def comparison_radius_estimate(
    oracle: DistanceOracle, k: float, p, mode: str, n_samples: int, seed: int, rtol: float = BISECTION_RTOL
) -> float:
    """Largest radius r on a bisection grid such that every sampled quadruple of B_r(p) passes.

    The cap is the localization radius of the oracle region at p.  The same
    variates are reused at every radius, so the estimate is monotone in the
    samples.  An empirical lower-bound estimator of the comparison radius.
    """
    p = np.asarray(p, dtype=float)
    cap = oracle.max_radius(p)
    if cap <= 0:
        return 0.0
    rng = rng_for(seed, "radius", mode.lower())
    u = rng.random((n_samples, 4))
    theta = 2 * np.pi * rng.random((n_samples, 4))
    test = _batch(mode)

    def passes(r):
        quads = oracle.ball_points(p, r, u, theta)
        return _batch_passes(test(oracle, k, quads))

    if passes(cap):
        return cap
    lo, hi = 0.0, cap
    while hi - lo > rtol * cap:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _batch_passes(batch: VerdictBatch) -> bool:
    return not np.any(batch.result == "fail")


def critical_curvature_search(
    oracle: DistanceOracle, region: Rect, mode: str, k_lo: float, k_hi: float, n_samples: int, seed: int,
    rtol: float = CRITICAL_RTOL,
) -> float:
    """Bisect for sup{k : CBB(k) passes} or inf{k : CAT(k) passes} on one quadruple sample.

    Distances are computed once and reused for every k.

    Raises:
        DomainError: k_lo >= k_hi, or the bracket end that must pass fails.
    """
    if not k_lo < k_hi:
        raise DomainError("critical_curvature_search needs k_lo < k_hi")
    mode = mode.lower()
    quads = sample_quadruples(region, n_samples, seed, mode)
    D, E = quadruple_distances(oracle, quads)

    def ok(k):
        return _batch_passes(verdicts_from_distances(mode, k, quads, D, E))

    lo, hi = float(k_lo), float(k_hi)
    if mode == "cbb" and not ok(lo):
        raise DomainError(f"bracket invalid: CBB({lo}) already fails on the sample")
    if mode == "cat" and not ok(hi):
        raise DomainError(f"bracket invalid: CAT({hi}) already fails on the sample")
    width = (hi - lo) * rtol
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if ok(mid) == (mode == "cbb"):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def oracle_for(field: MetricField, region: Optional[Rect] = None, method: str = "refine", resolution: int = 65) -> DistanceOracle:
    """Closed-form oracle for catalog model planes, path oracle otherwise."""
    name = field.name
    if name == "flat" or name.startswith("constk("):
        k = 0.0 if name == "flat" else float(name[len("constk(") : -1])
        return ModelOracle(k, region or field.domain)
    return PathOracle(field, region, method=method, resolution=resolution)


def summarize(batches: List[VerdictBatch]) -> dict:
    return {f"{b.mode}({b.k:g})": b.summary() for b in batches}
