"""Riemannian metrics on rectangular 2-D charts and the built-in catalog.

Every evaluator is vectorized: points have shape (..., 2) and metric values
come back with shape (..., 2, 2).  Derivative arrays are indexed
``d[..., i, j, k] = d g_ij / d x^k``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import DegeneracyError, DomainError


class Regularity(str, Enum):
    C0 = "C0"
    LIPSCHITZ = "Lipschitz"
    C1 = "C1"
    C2 = "C2"
    SMOOTH = "Smooth"


@dataclass(frozen=True)
class Rect:
    """Axis-aligned chart rectangle [x0, x1] x [y0, y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise DomainError(f"empty rectangle {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2])

    def shrink(self, margin: float) -> "Rect":
        return Rect(self.x0 + margin, self.x1 - margin, self.y0 + margin, self.y1 - margin)

    def contains(self, pts, tol: float = 0.0):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return (
            (x >= self.x0 - tol) & (x <= self.x1 + tol) & (y >= self.y0 - tol) & (y <= self.y1 + tol)
        )

    def contains_rect(self, other: "Rect", tol: float = 1e-12) -> bool:
        return (
            other.x0 >= self.x0 - tol
            and other.x1 <= self.x1 + tol
            and other.y0 >= self.y0 - tol
            and other.y1 <= self.y1 + tol
        )

    def clamp(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.empty_like(pts)
        out[..., 0] = np.clip(pts[..., 0], self.x0, self.x1)
        out[..., 1] = np.clip(pts[..., 1], self.y0, self.y1)
        return out

    def boundary_distance(self, pts):
        """Euclidean chart distance to the rectangle boundary (0 outside)."""
        pts = np.asarray(pts, dtype=float)
        d = np.minimum.reduce(
            [pts[..., 0] - self.x0, self.x1 - pts[..., 0], pts[..., 1] - self.y0, self.y1 - pts[..., 1]]
        )
        return np.maximum(d, 0.0)

    def grid(self, nx: int, ny: Optional[int] = None):
        """Node coordinates (xs, ys) of a uniform nx-by-ny grid including the edges."""
        ny = nx if ny is None else ny
        return np.linspace(self.x0, self.x1, nx), np.linspace(self.y0, self.y1, ny)

    def as_list(self):
        return [self.x0, self.x1, self.y0, self.y1]


@dataclass(frozen=True)
class MetricField:
    """A Riemannian metric on a rectangular chart.

    Attributes:
        domain: chart rectangle on which ``evaluate`` is defined.
        evaluate: points (..., 2) -> symmetric matrices (..., 2, 2).
        regularity: smoothness class of the components.
        derivatives: optional exact first derivatives, (..., 2) -> (..., 2, 2, 2).
        sectional: optional exact Gauss curvature, (..., 2) -> (...).
        name: catalog spec string, used in reports.
    """

    domain: Rect
    evaluate: Callable[[np.ndarray], np.ndarray]
    regularity: Regularity = Regularity.SMOOTH
    derivatives: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sectional: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"

    def __call__(self, pts):
        return self.evaluate(np.asarray(pts, dtype=float))

    def norm2(self, pts, vecs):
        """g(v, v) at each point."""
        g = self(pts)
        v = np.asarray(vecs, dtype=float)
        return np.einsum("...i,...ij,...j->...", v, g, v)


def _as_points(pts):
    pts = np.asarray(pts, dtype=float)
    if pts.shape[-1] != 2:
        raise DomainError(f"chart points must have trailing dimension 2, got {pts.shape}")
    return pts


def _diag(a, b):
    out = np.zeros(np.shape(a) + (2, 2))
    out[..., 0, 0] = a
    out[..., 1, 1] = b
    return out


def _conformal(psi):
    return _diag(psi, psi)


def flat(domain: Rect = Rect(-1.0, 1.0, -1.0, 1.0)) -> MetricField:
    """The Euclidean metric."""

    def evaluate(pts):
        pts = _as_points(pts)
        return _conformal(np.ones(pts.shape[:-1]))

    def derivatives(pts):
        pts = _as_points(pts)
        return np.zeros(pts.shape[:-1] + (2, 2, 2))

    def sectional(pts):
        return np.zeros(_as_points(pts).shape[:-1])

    return MetricField(domain, evaluate, Regularity.SMOOTH, derivatives, sectional, "flat")


def _check_lambda(lam: float):
    if not (1.0 < lam < 2.0):
        raise DomainError(f"Hartman-Wintner exponent must lie in (1, 2), got {lam}")


def _abs_pow_and_slope(x, lam):
    """|x|^lam and its derivative lam |x|^(lam-1) sign(x); the slope is 0 at x = 0."""
    ax = np.abs(x)
    return ax**lam, lam * ax ** (lam - 1.0) * np.sign(x)


def hw1_sectional(x, lam: float):
    """Gauss curvature of (1 + |x|^lam)(dx^2 + dy^2)."""
    ax = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        f = 1.0 + ax**lam
        return lam * ax ** (lam - 2.0) * (f - lam) / (2.0 * f**3)


def hw2_sectional(x, lam: float):
    """Gauss curvature of dx^2 + (1 - |x|^lam) dy^2."""
    ax = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        xl = ax**lam
        return lam * ax ** (lam - 2.0) * (2.0 * lam + xl * (2.0 - lam) - 2.0) / (4.0 * (xl - 1.0) ** 2)


def make_hw1(lam: float, domain: Rect = Rect(-1.0, 1.0, -1.0, 1.0)) -> MetricField:
    """First Hartman-Wintner metric (1 + |x|^lam) * Identity, curvature -> -inf at x = 0."""
    _check_lambda(lam)

    def evaluate(pts):
        pts = _as_points(pts)
        f = 1.0 + np.abs(pts[..., 0]) ** lam
        return _conformal(f)

    def derivatives(pts):
        pts = _as_points(pts)
        _, fx = _abs_pow_and_slope(pts[..., 0], lam)
        d = np.zeros(pts.shape[:-1] + (2, 2, 2))
        d[..., 0, 0, 0] = fx
        d[..., 1, 1, 0] = fx
        return d

    def sectional(pts):
        return hw1_sectional(_as_points(pts)[..., 0], lam)

    return MetricField(domain, evaluate, Regularity.C1, derivatives, sectional, f"hw1({lam:g})")


def make_hw2(lam: float, domain: Rect = Rect(-0.9, 0.9, -1.0, 1.0)) -> MetricField:
    """Second Hartman-Wintner metric diag(1, 1 - |x|^lam), curvature -> +inf at x = 0."""
    _check_lambda(lam)
    if domain.x0 <= -1.0 or domain.x1 >= 1.0:
        raise DomainError("hw2 is only a metric on |x| < 1")

    def _check(x):
        if np.any(np.abs(x) >= 1.0):
            raise DomainError("hw2 evaluated outside |x| < 1")

    def evaluate(pts):
        pts = _as_points(pts)
        _check(pts[..., 0])
        return _diag(np.ones(pts.shape[:-1]), 1.0 - np.abs(pts[..., 0]) ** lam)

    def derivatives(pts):
        pts = _as_points(pts)
        _check(pts[..., 0])
        _, fx = _abs_pow_and_slope(pts[..., 0], lam)
        d = np.zeros(pts.shape[:-1] + (2, 2, 2))
        d[..., 1, 1, 0] = -fx
        return d

    def sectional(pts):
        return hw2_sectional(_as_points(pts)[..., 0], lam)

    return MetricField(domain, evaluate, Regularity.C1, derivatives, sectional, f"hw2({lam:g})")


def constant_curvature_domain(k: float) -> Rect:
    if k > 0:
        h = 1.0 / np.sqrt(k)
    elif k < 0:
        # square inscribed in the disk of radius 0.9/sqrt(-k)
        h = 0.9 / np.sqrt(-k) / np.sqrt(2.0)
    else:
        h = 1.0
    return Rect(-h, h, -h, h)


def make_constant_curvature(k: float, domain: Optional[Rect] = None) -> MetricField:
    """Stereographic chart 4/(1 + k|z|^2)^2 * Identity of curvature k; identity for k = 0."""
    if k == 0:
        m = flat(domain or constant_curvature_domain(0.0))
        return MetricField(m.domain, m.evaluate, m.regularity, m.derivatives, m.sectional, "constk(0)")
    domain = domain or constant_curvature_domain(k)
    if k < 0:
        reach = np.hypot(max(abs(domain.x0), abs(domain.x1)), max(abs(domain.y0), abs(domain.y1)))
        if reach >= 1.0 / np.sqrt(-k):
            raise DomainError("hyperbolic chart domain must stay inside the disk of radius 1/sqrt(-k)")

    def evaluate(pts):
        pts = _as_points(pts)
        r2 = np.sum(pts * pts, axis=-1)
        return _conformal(4.0 / (1.0 + k * r2) ** 2)

    def derivatives(pts):
        pts = _as_points(pts)
        r2 = np.sum(pts * pts, axis=-1)
        q = -16.0 * k / (1.0 + k * r2) ** 3
        d = np.zeros(pts.shape[:-1] + (2, 2, 2))
        for kk in range(2):
            d[..., 0, 0, kk] = q * pts[..., kk]
            d[..., 1, 1, kk] = q * pts[..., kk]
        return d

    def sectional(pts):
        return np.full(_as_points(pts).shape[:-1], float(k))

    return MetricField(domain, evaluate, Regularity.SMOOTH, derivatives, sectional, f"constk({k:g})")


def from_components(
    g11: Callable, g12: Callable, g22: Callable, domain: Rect, regularity: Regularity = Regularity.SMOOTH, name="custom"
) -> MetricField:
    """Build a metric from three scalar component functions f(x, y)."""

    def evaluate(pts):
        pts = _as_points(pts)
        x, y = pts[..., 0], pts[..., 1]
        shape = pts.shape[:-1]
        out = np.empty(shape + (2, 2))
        out[..., 0, 0] = np.broadcast_to(g11(x, y), shape)
        out[..., 0, 1] = out[..., 1, 0] = np.broadcast_to(g12(x, y), shape)
        out[..., 1, 1] = np.broadcast_to(g22(x, y), shape)
        return out

    return MetricField(domain, evaluate, regularity, name=name)


def wedge_norm(g, v, w):
    """g(v^w, v^w) = g(v,v) g(w,w) - g(v,w)^2, the squared area of the parallelogram."""
    g = np.asarray(g, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    gvv = np.einsum("...i,...ij,...j->...", v, g, v)
    gww = np.einsum("...i,...ij,...j->...", w, g, w)
    gvw = np.einsum("...i,...ij,...j->...", v, g, w)
    return np.maximum(gvv * gww - gvw * gvw, 0.0)


def wedge_inner(g, v1, v2, w1, w2):
    """Induced inner product g(v1^v2, w1^w2) on bivectors."""
    def ip(a, b):
        return np.einsum("...i,...ij,...j->...", np.asarray(a, float), g, np.asarray(b, float))

    g = np.asarray(g, dtype=float)
    return ip(v1, w1) * ip(v2, w2) - ip(v1, w2) * ip(v2, w1)


def nondegeneracy_scan(field: MetricField, resolution: int, region: Optional[Rect] = None):
    """Extreme eigenvalues of the metric over a uniform grid.

    Raises:
        DegeneracyError: if the smallest eigenvalue is not positive; the
            offending grid point is attached.
    """
    if resolution < 2:
        raise DomainError("resolution must be at least 2")
    region = region or field.domain
    xs, ys = region.grid(resolution)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    eig = np.linalg.eigvalsh(field(pts))
    lo = eig[..., 0]
    idx = np.unravel_index(np.argmin(lo), lo.shape)
    lam_min = float(lo[idx])
    if not lam_min > 0:
        raise DegeneracyError(f"metric degenerate at {pts[idx].tolist()} (eigenvalue {lam_min})", pts[idx])
    return lam_min, float(eig[..., 1].max())


_SPEC = re.compile(r"^\s*(hw1|hw2|constk)\s*\(\s*([-+0-9.eE]+)\s*\)\s*$")


def parse_metric(spec: str) -> MetricField:
    """Resolve a catalog spec: ``hw1(l)``, ``hw2(l)``, ``constk(k)``, ``flat`` or ``csv:PATH``."""
    s = spec.strip()
    if s == "flat":
        return flat()
    if s.startswith("csv:") or s.endswith(".csv"):
        from .mollify import SampledMetric

        return SampledMetric.read_csv(s[4:] if s.startswith("csv:") else s).as_field()
    m = _SPEC.match(s)
    if not m:
        raise DomainError(f"unknown metric spec {spec!r}")
    name, arg = m.group(1), float(m.group(2))
    if name == "hw1":
        return make_hw1(arg)
    if name == "hw2":
        return make_hw2(arg)
    return make_constant_curvature(arg)
