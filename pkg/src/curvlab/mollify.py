"""Chart-wise mollifier convolution of scalar fields and metrics.

On a single chart the manifold convolution reduces to componentwise
convolution with the rescaled kernel rho_eps(u) = eps^-2 rho(u/eps); the
result is only defined on the chart shrunk by eps, which is the "usable"
domain of a smoothed field.

Quadrature is the composite midpoint rule on a tensor grid whose spacing
divides the output spacing and resolves the kernel with at least 17 nodes
per diameter.  The discrete kernel weights are non-negative and sum to one,
so constants are reproduced to rounding, odd moments vanish by symmetry and
non-negativity is preserved up to rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .errors import DegeneracyError, DomainError
from .metrics import MetricField, Rect, Regularity

MIN_KERNEL_NODES = 17
MIN_RESOLUTION = 16


def _bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def _wendland(r):
    r = np.asarray(r, dtype=float)
    return np.where(r < 1.0, (1.0 - r) ** 4 * (4.0 * r + 1.0), 0.0)


PROFILES = {"bump": _bump, "wendland": _wendland}


@dataclass(frozen=True)
class Mollifier:
    """Radial kernel on the unit disk, normalized to unit integral.

    ``mollifier(r)`` is the normalized density at radius r; ``kernel(u)``
    evaluates it on vectors u of shape (..., 2).
    """

    name: str
    profile: Callable
    normalization: float

    def __call__(self, r):
        return self.normalization * self.profile(np.asarray(r, dtype=float))

    def kernel(self, u):
        u = np.asarray(u, dtype=float)
        return self(np.hypot(u[..., 0], u[..., 1]))

    def scaled(self, eps: float, u):
        """rho_eps(u) = eps^-2 rho(u / eps)."""
        return self.kernel(np.asarray(u, dtype=float) / eps) / eps**2


def make_mollifier(profile_name: str) -> Mollifier:
    """Normalized ``bump`` (exp(-1/(1-r^2))) or ``wendland`` ((1-r)^4 (4r+1)) kernel."""
    try:
        prof = PROFILES[profile_name]
    except KeyError:
        raise DomainError(f"unknown mollifier profile {profile_name!r}; choose from {sorted(PROFILES)}") from None
    mass, _ = integrate.quad(lambda r: 2.0 * np.pi * r * float(prof(r)), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)
    return Mollifier(profile_name, prof, 1.0 / mass)


def _as_mollifier(m) -> Mollifier:
    return make_mollifier(m) if isinstance(m, str) else m


@dataclass(frozen=True)
class _Stencil:
    region: Rect
    xs: np.ndarray
    ys: np.ndarray
    sub: tuple
    fine_x: np.ndarray
    fine_y: np.ndarray
    weights: np.ndarray


def _stencil(domain: Rect, mollifier: Mollifier, eps: float, resolution: int, region: Optional[Rect]) -> _Stencil:
    if not eps > 0:
        raise DomainError("epsilon must be positive")
    if eps >= 0.5 * min(domain.width, domain.height):
        raise DomainError(f"epsilon={eps} is not below half the chart width")
    if resolution < MIN_RESOLUTION:
        raise DomainError(f"resolution must be at least {MIN_RESOLUTION}")
    usable = domain.shrink(eps)
    region = region or usable
    if not usable.contains_rect(region):
        raise DomainError(f"output region {region} exceeds the usable domain {usable} for epsilon={eps}")
    xs, ys = region.grid(resolution)
    hx, hy = xs[1] - xs[0], ys[1] - ys[0]
    half = (MIN_KERNEL_NODES - 1) // 2
    sx = max(1, math.ceil(half * hx / eps))
    sy = max(1, math.ceil(half * hy / eps))
    qx, qy = hx / sx, hy / sy
    rx = int(math.floor(eps / qx * (1 + 1e-12)))
    ry = int(math.floor(eps / qy * (1 + 1e-12)))
    ox = np.arange(-rx, rx + 1) * qx
    oy = np.arange(-ry, ry + 1) * qy
    w = mollifier.scaled(eps, np.stack(np.meshgrid(ox, oy, indexing="ij"), axis=-1)) * qx * qy
    w = w / w.sum()
    fine_x = region.x0 + np.arange(-rx, (resolution - 1) * sx + rx + 1) * qx
    fine_y = region.y0 + np.arange(-ry, (resolution - 1) * sy + ry + 1) * qy
    # rounding at the far edge must not step outside the chart
    fine_x = np.clip(fine_x, domain.x0, domain.x1)
    fine_y = np.clip(fine_y, domain.y0, domain.y1)
    return _Stencil(region, xs, ys, (sx, sy), fine_x, fine_y, w)


def _convolve(values: np.ndarray, st: _Stencil) -> np.ndarray:
    # the kernel is symmetric, so convolution and correlation agree
    out = fftconvolve(values, st.weights, mode="valid")
    return out[:: st.sub[0], :: st.sub[1]]


@dataclass(frozen=True)
class SampledScalar:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # values[ix, iy]
    epsilon: float

    @property
    def region(self) -> Rect:
        return Rect(self.xs[0], self.xs[-1], self.ys[0], self.ys[-1])


def smooth_scalar(
    f: Callable, domain: Rect, mollifier, epsilon: float, resolution: int, region: Optional[Rect] = None
) -> SampledScalar:
    """Convolve a scalar field f(x, y) with rho_eps on the usable part of ``domain``."""
    mol = _as_mollifier(mollifier)
    st = _stencil(domain, mol, epsilon, resolution, region)
    fx, fy = np.meshgrid(st.fine_x, st.fine_y, indexing="ij")
    vals = np.broadcast_to(np.asarray(f(fx, fy), dtype=float), fx.shape)
    return SampledScalar(st.xs, st.ys, _convolve(vals, st), float(epsilon))


@dataclass(frozen=True)
class SampledMetric:
    """Metric components on a uniform node grid, g11/g12/g22 with shape (nx, ny)."""

    xs: np.ndarray
    ys: np.ndarray
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    epsilon: float = 0.0
    name: str = "sampled"

    @property
    def region(self) -> Rect:
        return Rect(float(self.xs[0]), float(self.xs[-1]), float(self.ys[0]), float(self.ys[-1]))

    def matrices(self) -> np.ndarray:
        out = np.empty(self.g11.shape + (2, 2))
        out[..., 0, 0] = self.g11
        out[..., 0, 1] = self.g12
        out[..., 1, 0] = self.g12
        out[..., 1, 1] = self.g22
        return out

    def check_spd(self):
        """Sylvester's criterion at every node.

        Raises:
            DegeneracyError: naming the first failing node.
        """
        det = self.g11 * self.g22 - self.g12 * self.g12
        bad = ~((self.g11 > 0) & (det > 0))
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            pt = np.array([self.xs[i], self.ys[j]])
            raise DegeneracyError(
                f"smoothed metric not positive-definite at {pt.tolist()}; epsilon={self.epsilon} is too large", pt
            )

    def interpolate(self, pts) -> np.ndarray:
        """Bilinear interpolation of the components at chart points (..., 2)."""
        pts = np.asarray(pts, dtype=float)
        reg = self.region
        if not np.all(reg.contains(pts, tol=1e-9 * (1 + reg.width))):
            raise DomainError(f"point outside sampled region {reg}")
        x = np.clip(pts[..., 0], reg.x0, reg.x1)
        y = np.clip(pts[..., 1], reg.y0, reg.y1)
        nx, ny = len(self.xs), len(self.ys)
        hx = (reg.x1 - reg.x0) / (nx - 1)
        hy = (reg.y1 - reg.y0) / (ny - 1)
        fx = (x - reg.x0) / hx
        fy = (y - reg.y0) / hy
        i = np.clip(np.floor(fx).astype(int), 0, nx - 2)
        j = np.clip(np.floor(fy).astype(int), 0, ny - 2)
        tx = fx - i
        ty = fy - j
        out = np.empty(pts.shape[:-1] + (2, 2))
        for comp, (a, b) in ((self.g11, (0, 0)), (self.g12, (0, 1)), (self.g22, (1, 1))):
            v = (
                comp[i, j] * (1 - tx) * (1 - ty)
                + comp[i + 1, j] * tx * (1 - ty)
                + comp[i, j + 1] * (1 - tx) * ty
                + comp[i + 1, j + 1] * tx * ty
            )
            out[..., a, b] = v
            out[..., b, a] = v
        return out

    def as_field(self) -> MetricField:
        """View as a MetricField (bilinear interpolation, hence only Lipschitz)."""
        return MetricField(self.region, self.interpolate, Regularity.LIPSCHITZ, name=self.name)

    def write_csv(self, path):
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "g11", "g12", "g22"])
            for row in zip(X.ravel(), Y.ravel(), self.g11.ravel(), self.g12.ravel(), self.g22.ravel()):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path) -> "SampledMetric":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        xs = np.unique(data[:, 0])
        ys = np.unique(data[:, 1])
        if len(xs) * len(ys) != len(data):
            raise DomainError(f"{path}: rows do not form a full rectangular grid")
        ix = np.searchsorted(xs, data[:, 0])
        iy = np.searchsorted(ys, data[:, 1])
        comps = []
        for col in (2, 3, 4):
            arr = np.empty((len(xs), len(ys)))
            arr[ix, iy] = data[:, col]
            comps.append(arr)
        return cls(xs, ys, *comps, name=f"csv:{path}")


def smooth_metric(
    field: MetricField, mollifier, epsilon: float, resolution: int, region: Optional[Rect] = None
) -> SampledMetric:
    """Componentwise convolution g * rho_eps sampled on a ``resolution``-square grid.

    The output grid covers ``region`` (default: the chart shrunk by epsilon).

    Raises:
        DomainError: epsilon too large for the chart or region outside the usable domain.
        DegeneracyError: a smoothed node matrix is not positive-definite.
    """
    mol = _as_mollifier(mollifier)
    st = _stencil(field.domain, mol, epsilon, resolution, region)
    pts = np.stack(np.meshgrid(st.fine_x, st.fine_y, indexing="ij"), axis=-1)
    g = field(pts)
    comps = [_convolve(np.ascontiguousarray(g[..., a, b]), st) for a, b in ((0, 0), (0, 1), (1, 1))]
    sm = SampledMetric(st.xs, st.ys, *comps, epsilon=float(epsilon), name=f"{field.name}*{mol.name}[{epsilon:g}]")
    sm.check_spd()
    return sm


def sample_metric(field: MetricField, resolution: int, region: Optional[Rect] = None) -> SampledMetric:
    """Unsmoothed samples of a metric on a node grid (epsilon = 0)."""
    region = region or field.domain
    xs, ys = region.grid(resolution)
    g = field(np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1))
    return SampledMetric(xs, ys, g[..., 0, 0].copy(), g[..., 0, 1].copy(), g[..., 1, 1].copy(), name=field.name)


@dataclass
class DistanceConvergenceReport:
    metric: str
    epsilon_schedule: list
    max_relative_deviation: list
    reference_distances: list
    non_increasing: bool
    noise: float = 0.10

    def to_dict(self):
        return {
            "metric": self.metric,
            "epsilon_schedule": self.epsilon_schedule,
            "max_relative_deviation": self.max_relative_deviation,
            "reference_distances": self.reference_distances,
            "non_increasing": self.non_increasing,
            "noise": self.noise,
        }


def distance_convergence_experiment(
    field: MetricField,
    eps_schedule: Sequence[float],
    sample_pairs,
    resolution: int,
    mollifier="bump",
    smoothing_resolution: int = 161,
    refine_levels: int = 3,
    noise: float = 0.10,
) -> DistanceConvergenceReport:
    """Relative deviation of d_{g_eps} from d_g over point pairs, for each epsilon.

    Both distances come from the same pipeline (grid Dijkstra on the chart
    shrunk by the largest epsilon, then path refinement), so the lattice
    error largely cancels in the comparison.  Pairs with p = q count as
    deviation 0.
    """
    from .paths import pairwise_distances

    mol = _as_mollifier(mollifier)
    eps_schedule = [float(e) for e in eps_schedule]
    pairs = np.asarray(sample_pairs, dtype=float).reshape(-1, 2, 2)
    window = field.domain.shrink(max(eps_schedule))
    if not np.all(window.contains(pairs)):
        raise DomainError("sample points must lie in the usable domain of the largest epsilon")
    P, Q = pairs[:, 0], pairs[:, 1]
    same = np.all(P == Q, axis=-1)
    ref, _ = pairwise_distances(field, P, Q, resolution=resolution, window=window, refine_levels=refine_levels)
    devs = []
    for eps in eps_schedule:
        sm = smooth_metric(field, mol, eps, smoothing_resolution, region=window).as_field()
        d, _ = pairwise_distances(sm, P, Q, resolution=resolution, window=window, refine_levels=refine_levels)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(same, 0.0, np.abs(d - ref) / ref)
        devs.append(float(rel.max()) if len(rel) else 0.0)
    ok = all(b <= a * (1 + noise) + 1e-12 for a, b in zip(devs, devs[1:]))
    return DistanceConvergenceReport(field.name, eps_schedule, devs, ref.tolist(), ok, noise)
