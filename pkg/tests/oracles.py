"""Independent reference computations shared by the test modules.

Nothing here imports the package; every value is derived by a different
route (symbolic algebra, embeddings, closed forms) than the code under test.
"""

import math

import numpy as np
import sympy as sp

_x, _y = sp.symbols("x y", real=True)


def brioschi_orthogonal(E, G):
    """Gauss curvature of E dx^2 + G dy^2 as a callable of (x, y).

    Uses K = -1/(2 sqrt(EG)) [ d/dx (G_x / sqrt(EG)) + d/dy (E_y / sqrt(EG)) ].
    """
    W = sp.sqrt(E * G)
    K = -(sp.diff(sp.diff(G, _x) / W, _x) + sp.diff(sp.diff(E, _y) / W, _y)) / (2 * W)
    return sp.lambdify((_x, _y), sp.simplify(K), "mpmath")


def hw1_curvature(lam):
    """K for (1+|x|^lam)(dx^2+dy^2), valid for x > 0 (the metric is even in x)."""
    f = 1 + _x ** sp.Rational(lam).limit_denominator(1000)
    K = brioschi_orthogonal(f, f)
    return lambda x, y: float(K(abs(x), y))


def hw2_curvature(lam):
    """K for dx^2 + (1-|x|^lam) dy^2, x > 0 branch."""
    G = 1 - _x ** sp.Rational(lam).limit_denominator(1000)
    K = brioschi_orthogonal(sp.Integer(1), G)
    return lambda x, y: float(K(abs(x), y))


def sphere_distance(k, p, q):
    """Distance in the stereographic chart of the sphere of curvature k > 0.

    Lifts both chart points to the radius-1/sqrt(k) sphere in R^3 and returns
    the arc length along the great circle.
    """
    R = 1.0 / math.sqrt(k)

    def lift(z):
        s = z[0] ** 2 + z[1] ** 2
        u = np.array([z[0], z[1], 0.0]) * math.sqrt(k)
        d = 1 + k * s
        return R * np.array([2 * u[0] / d, 2 * u[1] / d, (1 - k * s) / d])

    a, b = lift(p), lift(q)
    return R * 2 * math.asin(min(1.0, np.linalg.norm(a - b) / (2 * R)))


def hyperbolic_distance(k, p, q):
    """Distance for k < 0 via the hyperboloid model in Minkowski space."""
    R = 1.0 / math.sqrt(-k)

    def lift(z):
        s = -k * (z[0] ** 2 + z[1] ** 2)
        d = 1 - s
        return np.array([(1 + s) / d, 2 * math.sqrt(-k) * z[0] / d, 2 * math.sqrt(-k) * z[1] / d])

    a, b = lift(p), lift(q)
    inner = a[0] * b[0] - a[1] * b[1] - a[2] * b[2]
    return R * math.acosh(max(1.0, inner))


def model_plane_distance(k, p, q):
    if k > 0:
        return sphere_distance(k, p, q)
    if k < 0:
        return hyperbolic_distance(k, p, q)
    return float(np.hypot(q[0] - p[0], q[1] - p[1]))


def conformal_x_distance(f, fprime, p, q, spreads=(0.0, 0.25, -0.25, 0.6, -0.6)):
    """Length of the shortest geodesic found by shooting for f(x)(dx^2 + dy^2).

    Hand-written geodesic equations integrated with scipy's DOP853; the
    unknowns (initial angle, length) are solved with scipy.optimize.root
    from several starting angles, and the shortest converged solution wins.
    """
    from scipy.integrate import solve_ivp
    from scipy.optimize import root

    p = np.asarray(p, float)
    q = np.asarray(q, float)

    def rhs(_t, s):
        x, y, vx, vy = s
        a = fprime(x) / (2 * f(x))
        return [vx, vy, -a * (vx * vx - vy * vy), -2 * a * vx * vy]

    def endpoint(theta, length):
        s0 = f(p[0]) ** -0.5
        sol = solve_ivp(rhs, (0, length), [p[0], p[1], s0 * math.cos(theta), s0 * math.sin(theta)],
                        method="DOP853", rtol=1e-12, atol=1e-13)
        return sol.y[:2, -1]

    chord = q - p
    theta0 = math.atan2(chord[1], chord[0])
    mid = 0.5 * (p + q)
    length0 = float(np.hypot(*chord)) * math.sqrt(f(mid[0]))
    best = math.inf
    for spread in spreads:
        sol = root(lambda z: endpoint(z[0], z[1]) - q, [theta0 + spread, length0 / math.cos(spread)], tol=1e-13)
        if sol.success and sol.x[1] > 0 and np.max(np.abs(endpoint(*sol.x) - q)) < 1e-9:
            best = min(best, float(sol.x[1]))
    return best


def hw1_distance(lam, p, q):
    return conformal_x_distance(
        lambda x: 1 + abs(x) ** lam, lambda x: lam * abs(x) ** (lam - 1) * math.copysign(1.0, x), p, q
    )


def law_of_cosines_angle(k, opp, b, c):
    """Angle opposite ``opp`` in the model plane of curvature k, by the plain law of cosines.

    NaN when the triangle does not exist in that plane.
    """
    opp, b, c = (np.asarray(v, dtype=float) for v in (opp, b, c))
    with np.errstate(invalid="ignore", divide="ignore"):
        if k > 0:
            s = math.sqrt(k)
            cos_t = (np.cos(s * opp) - np.cos(s * b) * np.cos(s * c)) / (np.sin(s * b) * np.sin(s * c))
        elif k < 0:
            s = math.sqrt(-k)
            cos_t = (np.cosh(s * b) * np.cosh(s * c) - np.cosh(s * opp)) / (np.sinh(s * b) * np.sinh(s * c))
        else:
            cos_t = (b * b + c * c - opp * opp) / (2 * b * c)
    ok = (opp <= b + c + 1e-12) & (opp >= np.abs(b - c) - 1e-12) & (b > 0) & (c > 0)
    if k > 0:
        ok &= b + c + opp < 2 * math.pi / math.sqrt(k)
    return np.where(ok, np.arccos(np.clip(cos_t, -1, 1)), np.nan)


def brute_force_verdicts(mode, k, dist, quads, tol=1e-7):
    """Pass/fail flags for each quadruple, computed pair by pair from ``dist(p, q)``.

    ``dist`` is a scalar function; admissibility and degenerate cases are
    left to the caller (quadruples here are well separated).
    """
    out = []
    for quad in quads:
        d = {(i, j): dist(quad[i], quad[j]) for i in range(4) for j in range(4) if i < j}
        D = lambda i, j: d[(min(i, j), max(i, j))]  # noqa: E731
        ang = lambda v, a, b: float(law_of_cosines_angle(k, D(a, b), D(v, a), D(v, b)))  # noqa: E731
        if mode == "cbb":
            tris = [(1, 2), (2, 3), (3, 1)]
            if k > 0 and any(D(0, a) + D(0, b) + D(a, b) >= 2 * math.pi / math.sqrt(k) for a, b in tris):
                out.append("inadmissible")
                continue
            total = sum(ang(0, a, b) for a, b in tris)
            out.append("pass" if total <= 2 * math.pi + tol else "fail")
        else:
            angles = [ang(0, 2, 3), ang(0, 1, 2), ang(0, 1, 3), ang(1, 2, 3), ang(1, 0, 2), ang(1, 0, 3)]
            if any(math.isnan(a) for a in angles):
                out.append("pass")
                continue
            ok1 = angles[0] <= angles[1] + angles[2] + tol
            ok2 = angles[3] <= angles[4] + angles[5] + tol
            out.append("pass" if ok1 or ok2 else "fail")
    return out
