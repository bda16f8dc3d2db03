"""Exact geometry of the constant-curvature model planes M^2(k).

Side/angle relations use the half-angle (haversine) forms of the laws of
cosines written with the generalized sine ``sn_k``.  One formula then covers
k > 0, k = 0 and k < 0 and stays accurate for nearly degenerate triangles,
where the plain law of cosines loses all digits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InadmissibleError

# below this |k| the trigonometric forms are replaced by their Taylor series
SERIES_K = 1e-8
# relative admissibility margin on the perimeter, 2*diam - tau
PERIMETER_RTOL = 1e-9
# absolute slack allowed when checking triangle inequalities
TRIANGLE_ATOL = 1e-12


def diameter(k: float) -> float:
    """Diameter of M^2(k): pi/sqrt(k) for k > 0, infinity otherwise."""
    if k > 0:
        return float(np.pi / np.sqrt(k))
    return float("inf")


@dataclass(frozen=True)
class ModelPlane:
    """The comparison plane of constant curvature ``k``."""

    k: float
    diameter: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "diameter", diameter(self.k))

    def side(self, b, c, alpha):
        return model_side(self.k, b, c, alpha)

    def angle(self, a, b, c):
        return model_angle(self.k, a, b, c)


@dataclass(frozen=True)
class TriangleSides:
    """Side lengths a, b, c opposite the vertices A, B, C."""

    a: float
    b: float
    c: float

    @property
    def perimeter(self) -> float:
        return self.a + self.b + self.c

    def admissible(self, k: float) -> bool:
        return bool(_admissible_mask(k, self.a, self.b, self.c))


def sn(k: float, x):
    """Generalized sine: sin(sqrt(k) x)/sqrt(k), x, or sinh(sqrt(-k) x)/sqrt(-k)."""
    x = np.asarray(x, dtype=float)
    if abs(k) < SERIES_K:
        x2 = x * x
        return x * (1.0 - k * x2 / 6.0 + k * k * x2 * x2 / 120.0)
    if k > 0:
        s = np.sqrt(k)
        return np.sin(s * x) / s
    s = np.sqrt(-k)
    return np.sinh(s * x) / s


def _asn(k: float, y):
    """Inverse of ``sn`` on [0, diameter/2]."""
    y = np.asarray(y, dtype=float)
    if abs(k) < SERIES_K:
        # invert x - k x^3/6 by one fixed-point correction
        return y * (1.0 + k * y * y / 6.0 + 3.0 * k * k * y**4 / 40.0)
    if k > 0:
        s = np.sqrt(k)
        return np.arcsin(np.clip(s * y, -1.0, 1.0)) / s
    s = np.sqrt(-k)
    return np.arcsinh(s * y) / s


def perimeter_limit(k: float) -> float:
    """Largest admissible perimeter, 2*diam(k) minus the rounding margin."""
    d = diameter(k)
    if np.isinf(d):
        return np.inf
    return 2.0 * d - PERIMETER_RTOL * d


def _admissible_mask(k, a, b, c):
    a, b, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c)))
    tol = TRIANGLE_ATOL * (1.0 + a + b + c)
    ok = (a + b + c) < perimeter_limit(k)
    ok &= a <= b + c + tol
    ok &= b <= a + c + tol
    ok &= c <= a + b + tol
    ok &= (a >= 0) & (b >= 0) & (c >= 0)
    return ok


def model_angle_array(k: float, a, b, c):
    """Vectorized model angle at the vertex opposite ``a``.

    Returns NaN wherever the triangle is inadmissible or an adjacent side
    (``b`` or ``c``) vanishes.  A zero opposite side with positive adjacent
    sides gives angle 0.
    """
    a, b, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c)))
    ok = _admissible_mask(k, a, b, c) & (b > 0) & (c > 0)
    with np.errstate(invalid="ignore"):
        s_num = sn(k, 0.5 * (a + b - c)) * sn(k, 0.5 * (a - b + c))
        c_num = sn(k, 0.5 * (a + b + c)) * sn(k, 0.5 * (b + c - a))
        ang = 2.0 * np.arctan2(np.sqrt(np.maximum(s_num, 0.0)), np.sqrt(np.maximum(c_num, 0.0)))
    return np.where(ok, ang, np.nan)


def model_angle(k: float, a, b, c):
    """Angle of the M^2(k) triangle with sides (a, b, c) at the vertex opposite ``a``.

    With a = d(y, z), b = d(x, y), c = d(x, z) this is the comparison angle
    at x.  Accepts scalars or arrays; raises if any entry is inadmissible.

    Raises:
        InadmissibleError: perimeter >= 2*diam(k), a violated triangle
            inequality, or a zero adjacent side.
    """
    ang = model_angle_array(k, a, b, c)
    if np.any(np.isnan(ang)):
        raise InadmissibleError(
            f"no model triangle in M^2({k}) for sides a={a}, b={b}, c={c}"
        )
    return float(ang) if np.ndim(ang) == 0 else ang


def model_side(k: float, b, c, alpha):
    """Side opposite ``alpha`` in the M^2(k) hinge with adjacent sides b, c.

    Uses sn_k(a/2)^2 = sn_k((b-c)/2)^2 + sn_k(b) sn_k(c) sin^2(alpha/2), which
    is the haversine form of the spherical, Euclidean and hyperbolic laws of
    cosines.  The result is clamped to [|b-c|, min(b+c, diam(k))].

    Raises:
        DomainError: alpha outside [0, pi], negative sides, or b, c >= diam(k).
    """
    b, c, alpha = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (b, c, alpha)))
    diam = diameter(k)
    if np.any((alpha < 0) | (alpha > np.pi)):
        raise DomainError("hinge angle must lie in [0, pi]")
    if np.any((b < 0) | (c < 0)):
        raise DomainError("hinge sides must be non-negative")
    if np.any((b >= diam) | (c >= diam)):
        raise DomainError(f"hinge sides must be shorter than diam(M^2({k})) = {diam}")
    half = sn(k, 0.5 * (b - c)) ** 2 + sn(k, b) * sn(k, c) * np.sin(0.5 * alpha) ** 2
    a = 2.0 * _asn(k, np.sqrt(np.maximum(half, 0.0)))
    a = np.clip(a, np.abs(b - c), np.minimum(b + c, diam))
    return float(a) if a.ndim == 0 else a


def model_triangle(k: float, d_xy: float, d_yz: float, d_zx: float) -> np.ndarray:
    """Realize a model triangle in M^2(k).

    The first vertex sits at the origin and the second on the positive
    first axis.  For k = 0 rows are Cartesian (x, y); for k != 0 rows are
    geodesic polar coordinates (r, theta) about the first vertex, i.e.
    colatitude/sqrt(k) and longitude on the sphere, hyperboloid-polar
    coordinates on the hyperbolic plane.  ``model_distance`` reads both.

    Returns:
        Array of shape (3, 2).
    """
    if not _admissible_mask(k, d_yz, d_xy, d_zx):
        raise InadmissibleError(
            f"no model triangle in M^2({k}) with sides {d_xy}, {d_yz}, {d_zx}"
        )
    if d_xy > 0 and d_zx > 0:
        alpha = float(model_angle_array(k, d_yz, d_xy, d_zx))
    else:
        alpha = 0.0
    if k == 0:
        return np.array(
            [[0.0, 0.0], [d_xy, 0.0], [d_zx * np.cos(alpha), d_zx * np.sin(alpha)]]
        )
    return np.array([[0.0, 0.0], [d_xy, 0.0], [d_zx, alpha]])


def model_distance(k: float, u, v) -> float:
    """Distance in M^2(k) between two points in ``model_triangle`` coordinates."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if k == 0:
        return float(np.hypot(*(u - v)))
    dtheta = abs(u[1] - v[1]) % (2 * np.pi)
    dtheta = min(dtheta, 2 * np.pi - dtheta)
    return model_side(k, u[0], v[0], dtheta)
