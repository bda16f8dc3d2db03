"""Christoffel symbols, Riemann tensor and Gauss curvature of chart metrics.

Conventions: ``Riem(X, Y)Z = [nabla_X, nabla_Y]Z - nabla_[X,Y] Z`` so that the
round sphere has positive curvature, and in coordinates

    R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik

with ``R(d_i, d_j) d_k = R^l_ijk d_l``.  Array layouts: ``G[..., l, j, k]``
for Christoffel symbols, ``R[..., l, i, j, k]`` for the curvature tensor.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field
from typing import List, Optional, Sequence

import numpy as np

from .errors import BoundaryError, DegeneracyError, DomainError
from .metrics import MetricField, Rect, wedge_norm

DEFAULT_STEP = 1e-4
_E = np.eye(2)


@dataclass
class CurvatureSample:
    point: np.ndarray
    sectional: float
    christoffel: np.ndarray
    method: str  # "analytic" or "finite-difference"


def _check_reach(field: MetricField, pts, reach: float):
    if reach <= 0:
        return
    inside = field.domain.boundary_distance(pts) >= reach * (1 - 1e-9)
    if not np.all(inside):
        raise BoundaryError(
            f"finite-difference stencil of reach {reach:g} leaves the chart {field.domain}"
        )


def metric_derivatives(field: MetricField, pts, h: float = DEFAULT_STEP, exact: bool = True):
    """First derivatives ``d[..., i, j, k] = d_k g_ij``, exact if available, else central differences."""
    pts = np.asarray(pts, dtype=float)
    if exact and field.derivatives is not None:
        return field.derivatives(pts)
    d = np.empty(pts.shape[:-1] + (2, 2, 2))
    for k in range(2):
        step = h * _E[k]
        d[..., k] = (field(pts + step) - field(pts - step)) / (2.0 * h)
    return d


def _christoffel_from(g, dg):
    ginv = np.linalg.inv(g)
    # T[l, j, k] = d_j g_lk + d_k g_jl - d_l g_jk
    t = np.einsum("...lkj->...ljk", dg) + np.einsum("...jlk->...ljk", dg) - np.einsum("...jkl->...ljk", dg)
    gam = 0.5 * np.einsum("...il,...ljk->...ijk", ginv, t)
    return 0.5 * (gam + np.swapaxes(gam, -1, -2))


def christoffel(field: MetricField, p, h: float = DEFAULT_STEP, exact: bool = True):
    """Christoffel symbols ``G[..., i, j, k]`` of the Levi-Civita connection at ``p``.

    Exact derivatives are used when the field carries them (and ``exact`` is
    set); otherwise central differences with step ``h``, which require the
    stencil to stay inside the chart.

    Raises:
        BoundaryError: the difference stencil leaves the domain.
        DegeneracyError: the metric is singular at ``p``.
    """
    p = np.asarray(p, dtype=float)
    use_fd = not (exact and field.derivatives is not None)
    _check_reach(field, p, h if use_fd else 0.0)
    g = field(p)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    if np.any(det <= 0):
        raise DegeneracyError("metric is not invertible", p)
    return _christoffel_from(g, metric_derivatives(field, p, h, exact))


def riemann_tensor(field: MetricField, p, h: float = DEFAULT_STEP, exact: bool = True):
    """``R[..., l, i, j, k]`` from Christoffel symbols and their central differences."""
    p = np.asarray(p, dtype=float)
    use_fd = not (exact and field.derivatives is not None)
    _check_reach(field, p, 2 * h if use_fd else h)
    gam = christoffel(field, p, h, exact)
    dgam = np.empty(gam.shape + (2,))  # dgam[..., l, j, k, i] = d_i G^l_jk
    for i in range(2):
        step = h * _E[i]
        dgam[..., i] = (christoffel(field, p + step, h, exact) - christoffel(field, p - step, h, exact)) / (2 * h)
    return _riemann_from(gam, dgam)


def _riemann_from(gam, dgam):
    d_i = np.einsum("...ljki->...lijk", dgam)
    quad = np.einsum("...lim,...mjk->...lijk", gam, gam)
    r = d_i - np.swapaxes(d_i, -2, -3) + quad - np.swapaxes(quad, -2, -3)
    return r


def _curvature_scalar(g, r):
    """S = g(Riem(e1, e2) e2, e1), averaged over its four equivalent FD entries.

    In 2-D every component of the lowered tensor is +-S; averaging removes
    the small asymmetries finite differences leave behind.
    """
    low = np.einsum("...al,...lijk->...aijk", g, r)
    return 0.25 * (low[..., 0, 0, 1, 1] + low[..., 1, 1, 0, 0] - low[..., 0, 1, 0, 1] - low[..., 1, 0, 1, 0])


def _sectional_from(g, r):
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    return _curvature_scalar(g, r) / det


def sectional(field: MetricField, p, h: float = DEFAULT_STEP, method: str = "fd", exact: bool = True):
    """Gauss curvature at ``p`` (the only sectional curvature in 2-D).

    Args:
        method: ``"analytic"`` returns the field's closed form; ``"fd"``
            contracts the finite-difference Riemann tensor.
        exact: in ``"fd"`` mode, use exact first derivatives for the
            Christoffel symbols when the field provides them.
    """
    p = np.asarray(p, dtype=float)
    if method == "analytic":
        if field.sectional is None:
            raise DomainError(f"{field.name} has no analytic curvature")
        return field.sectional(p)
    if method != "fd":
        raise DomainError(f"unknown curvature method {method!r}")
    r = riemann_tensor(field, p, h, exact)
    out = _sectional_from(field(p), r)
    return float(out) if out.ndim == 0 else out


def sectional_in_basis(field: MetricField, p, v, w, h: float = DEFAULT_STEP, exact: bool = True):
    """sec(v, w) = g(Riem(v, w) w, v) / |v ^ w|^2 for explicit tangent vectors."""
    g = field(p)
    return riemann_form(field, p, v, w, v, w, h, exact) / wedge_norm(g, v, w)


def riemann_form(field: MetricField, p, v1, v2, w1, w2, h: float = DEFAULT_STEP, exact: bool = True):
    """Curvature bilinear form on bivectors, R(v1 ^ v2, w1 ^ w2) = g(Riem(v1, v2) w2, w1)."""
    r = riemann_tensor(field, p, h, exact)
    v1, v2, w1, w2 = (np.asarray(a, dtype=float) for a in (v1, v2, w1, w2))
    # in 2-D, R(v1 ^ v2, w1 ^ w2) = S det[v1 v2] det[w1 w2]
    cv = v1[..., 0] * v2[..., 1] - v1[..., 1] * v2[..., 0]
    cw = w1[..., 0] * w2[..., 1] - w1[..., 1] * w2[..., 0]
    out = _curvature_scalar(field(p), r) * cv * cw
    return float(out) if np.ndim(out) == 0 else out


def sample(field: MetricField, p, h: float = DEFAULT_STEP, method: str = "fd") -> CurvatureSample:
    p = np.asarray(p, dtype=float)
    sec = sectional(field, p, h, method)
    tag = "analytic" if method == "analytic" else "finite-difference"
    return CurvatureSample(p, float(sec), christoffel(field, p, h), tag)


GRID_RING = 4
NODES_PER_EPS = 4  # scan grids resolve the smoothing scale


def _diff4(a, h, axis):
    """Fourth-order central difference; the two outer layers fall back to np.gradient."""
    out = np.gradient(a, h, axis=axis)
    a = np.moveaxis(a, axis, 0)
    o = np.moveaxis(out, axis, 0)
    if a.shape[0] >= 5:
        o[2:-2] = (a[:-4] - 8 * a[1:-3] + 8 * a[3:-1] - a[4:]) / (12 * h)
    return out


def grid_sectional(xs, ys, g):
    """Gauss curvature on a uniform node grid from sampled metric components.

    ``g`` has shape (nx, ny, 2, 2).  Christoffel symbols and their
    derivatives use fourth-order central differences with the grid spacing
    as step.  The outer ``GRID_RING`` rings of nodes see lower-order edge
    stencils and should be discarded by the caller.
    """
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    dg = np.stack([_diff4(g, hx, 0), _diff4(g, hy, 1)], axis=-1)
    gam = _christoffel_from(g, dg)
    dgam = np.stack([_diff4(gam, hx, 0), _diff4(gam, hy, 1)], axis=-1)
    return _sectional_from(g, _riemann_from(gam, dgam))


def curvature_field(field: MetricField, region: Rect, resolution: int, h: Optional[float] = None, method="fd"):
    """Gauss curvature on a uniform grid over ``region``; returns (xs, ys, sec[ix, iy])."""
    xs, ys = region.grid(resolution)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    if h is None:
        h = max(DEFAULT_STEP, min(region.width, region.height) / (resolution - 1))
    return xs, ys, np.asarray(sectional(field, pts, h, method))


@dataclass
class BoundScanReport:
    """Per-epsilon extremes of smoothed curvature against a target bound.

    ``slack`` is min(sec) - k for a lower bound and k - max(sec) for an upper
    bound; a negative value is the amount by which the bound is violated.
    """

    metric: str
    region: List[float]
    direction: str
    k: float
    profile: str
    resolution: int
    epsilon_schedule: List[float]
    sec_min: List[float] = dc_field(default_factory=list)
    sec_max: List[float] = dc_field(default_factory=list)
    slack: List[float] = dc_field(default_factory=list)
    passed: List[bool] = dc_field(default_factory=list)
    grid_resolution: List[int] = dc_field(default_factory=list)
    tolerance: float = 1e-3
    trend: str = ""

    @property
    def deficit(self) -> List[float]:
        return [abs(s) for s in self.slack]

    def to_dict(self):
        d = asdict(self)
        d["deficit"] = self.deficit
        return d


def classify_trend(values: Sequence[float], noise: float = 0.10, floor: float = 1e-3) -> str:
    """Label a slack/deficit sequence along a decreasing epsilon schedule.

    ``vanishing``: non-increasing within ``noise`` and the last entry at most
    half the first (or already below ``floor``); ``divergent``: grows by more
    than the noise every step; ``bounded`` otherwise.
    """
    v = [abs(x) for x in values]
    if len(v) < 2:
        return "vanishing" if v and v[0] <= floor else "bounded"
    steps_down = all(b <= a * (1 + noise) + 1e-12 for a, b in zip(v, v[1:]))
    if steps_down and (v[-1] <= 0.5 * v[0] or v[-1] <= floor):
        return "vanishing"
    if all(b > a * (1 + noise) for a, b in zip(v, v[1:])):
        return "divergent"
    return "bounded"


def curvature_bound_scan(
    field: MetricField,
    mollifier,
    region: Rect,
    eps_schedule: Sequence[float],
    k: float,
    direction: str,
    resolution: int,
    tol: float = 1e-3,
) -> BoundScanReport:
    """Smooth the metric at each scale and compare its curvature on ``region`` with ``k``.

    The curvature of each smoothed metric is evaluated at the nodes of its
    sampling grid with fourth-order central differences.  The grid has
    ``resolution`` nodes per side, raised to keep ``NODES_PER_EPS`` nodes per
    epsilon so that the smoothing scale is resolved.  An entry passes when its slack is at least ``-tol``.
    """
    from .mollify import make_mollifier, smooth_metric

    if direction not in ("lower", "upper"):
        raise DomainError("direction must be 'lower' or 'upper'")
    if isinstance(mollifier, str):
        mollifier = make_mollifier(mollifier)
    eps_schedule = [float(e) for e in eps_schedule]
    span = max(region.width, region.height)
    plans = []
    for eps in eps_schedule:
        # never coarser than the requested grid, and at least NODES_PER_EPS nodes per epsilon
        n = max(resolution, int(math.ceil(NODES_PER_EPS * span / eps)) + 1)
        hx = region.width / (n - 1)
        hy = region.height / (n - 1)
        pad = GRID_RING
        padded = Rect(region.x0 - pad * hx, region.x1 + pad * hx, region.y0 - pad * hy, region.y1 + pad * hy)
        if not field.domain.shrink(eps).contains_rect(padded):
            raise DomainError(f"region {region} is not inside the usable domain for epsilon={eps}")
        plans.append((eps, n, padded))

    report = BoundScanReport(
        field.name, region.as_list(), direction, float(k), mollifier.name, resolution, eps_schedule, tolerance=tol
    )
    pad = GRID_RING
    for eps, n, padded in plans:
        sm = smooth_metric(field, mollifier, eps, n + 2 * pad, region=padded)
        sec = grid_sectional(sm.xs, sm.ys, sm.matrices())[pad:-pad, pad:-pad]
        lo, hi = float(sec.min()), float(sec.max())
        slack = lo - k if direction == "lower" else k - hi
        report.sec_min.append(lo)
        report.sec_max.append(hi)
        report.slack.append(slack)
        report.passed.append(bool(slack >= -tol))
        report.grid_resolution.append(n)
    violation = [max(0.0, -s) for s in report.slack]
    if all(v > tol for v in violation) and classify_trend(violation, floor=0.0) == "divergent":
        report.trend = "divergent"
    else:
        report.trend = classify_trend(report.slack, floor=tol)
    return report
