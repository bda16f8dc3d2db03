"""Experiment pipelines behind the CLI subcommands.

Each runner takes a validated config and an output directory, writes its
CSV artifacts, and returns ``(results, passed)``.
"""

from __future__ import annotations

import csv
import os
import time
from contextlib import contextmanager

import numpy as np

from . import comparison as cmp
from ._rng import rng_for
from .config import TASKS, ExperimentConfig
from .curvature import GRID_RING, curvature_bound_scan, curvature_field
from .errors import ConfigError, DomainError
from .metrics import MetricField, Rect, make_hw1, make_hw2, nondegeneracy_scan, parse_metric
from .mollify import distance_convergence_experiment, make_mollifier, smooth_metric
from .paths import geodesic_bvp, geodesic_ivp, grid_distance, minimizer_multiplicity, pairwise_distances

HW2_EXAMPLE = ((0.0, 0.0), (0.0, 0.5))
HW1_AXIS_EXAMPLE = ((0.0, -0.4), (0.0, 0.4))
HW1_BVP_EXAMPLE = ((0.0, 0.0), (0.3, 0.3))
EXAMPLE_RESOLUTION = 401


class Timer:
    def __init__(self):
        self.timings = {}

    @contextmanager
    def __call__(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_path(path, points):
    _write_rows(path, ["x", "y"], points.tolist())


def _need(value, name, sub):
    if value is None:
        raise ConfigError(f"config.{name}: required by '{sub}'")
    return value


def _task(cfg: ExperimentConfig, sub: str, default: str) -> str:
    task = cfg.task or default
    if task not in TASKS[sub]:
        raise ConfigError(f"config.task: '{task}' is not a {sub} task ({', '.join(TASKS[sub])})")
    return task


def scan_region(domain: Rect, eps_max: float, resolution: int) -> Rect:
    """Largest region whose padding ring stays eps_max inside the chart."""
    margin = GRID_RING * max(domain.width, domain.height) / (resolution - 1)
    return domain.shrink(eps_max + margin)


# ---------------------------------------------------------------- runners


def run_curvature(cfg, field: MetricField, out, timer):
    region = cfg.region_rect or scan_region(field.domain, max(cfg.eps), cfg.resolution)
    method = "analytic" if field.sectional is not None else "fd"
    with timer("field"):
        xs, ys, sec = curvature_field(field, region, cfg.resolution, method=method)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    _write_rows(os.path.join(out, "curvature_field.csv"), ["x", "y", "sec"], zip(X.ravel(), Y.ravel(), sec.ravel()))
    results = {
        "region": region.as_list(),
        "field_method": method,
        "field_min": float(np.nanmin(sec)),
        "field_max": float(np.nanmax(sec)),
    }
    if cfg.k is None:
        return results, True
    with timer("bound_scan"):
        report = curvature_bound_scan(field, cfg.mollifier, region, cfg.eps, cfg.k, cfg.direction, cfg.resolution, tol=cfg.tolerance)
    results["bound_scan"] = report.to_dict()
    _write_rows(
        os.path.join(out, "bound_scan.csv"),
        ["epsilon", "sec_min", "sec_max", "slack", "passed"],
        zip(report.epsilon_schedule, report.sec_min, report.sec_max, report.slack, map(int, report.passed)),
    )
    results["slack"] = report.slack[-1]
    return results, bool(report.passed[-1])


def run_mollify(cfg, field, out, timer):
    region = cfg.region_rect or field.domain.shrink(max(cfg.eps))
    mol = make_mollifier(cfg.mollifier)
    rows = []
    for eps in cfg.eps:
        with timer(f"smooth_{eps:g}"):
            sm = smooth_metric(field, mol, eps, cfg.resolution, region=region)
        sm.write_csv(os.path.join(out, f"smoothed_eps_{eps:g}.csv"))
        eig = np.linalg.eigvalsh(sm.matrices())
        rows.append({"epsilon": eps, "lambda_min": float(eig[..., 0].min()), "lambda_max": float(eig[..., 1].max())})
    return {"region": region.as_list(), "smoothed": rows}, True


def sample_distance_pairs(field: MetricField, region: Rect, n: int, seed: int, min_distance: float = 0.3):
    """Seeded uniform pairs in ``region`` whose g-distance is at least ``min_distance``.

    Uses d_g >= sqrt(lambda_min) * chart distance, so the bound holds without
    computing any distance.
    """
    rng = rng_for(seed, "distance-pairs")
    lo = np.array([region.x0, region.y0])
    span = np.array([region.width, region.height])
    lam_min, _ = nondegeneracy_scan(field, 65, region)
    min_sep = min_distance / np.sqrt(lam_min)
    if min_sep >= 0.9 * np.hypot(region.width, region.height):
        raise DomainError(f"region {region} is too small for pairs at distance {min_distance}")
    pairs = []
    while len(pairs) < n:
        cand = lo + span * rng.random((2, 2))
        if np.hypot(*(cand[0] - cand[1])) >= min_sep:
            pairs.append(cand)
    return np.array(pairs)


def run_distance(cfg, field, out, timer):
    window = cfg.region_rect or field.domain.shrink(max(cfg.eps))
    results = {"window": window.as_list()}
    if cfg.p is not None and cfg.q is not None:
        p, q = np.array(cfg.p, float), np.array(cfg.q, float)
        with timer("grid_distance"):
            lat, path = grid_distance(field, p, q, cfg.resolution, window=window)
        with timer("refine"):
            d, err = pairwise_distances(field, p[None], q[None], resolution=cfg.resolution, window=window)
        _write_path(os.path.join(out, "lattice_path.csv"), path.points)
        results["pair"] = {"p": cfg.p, "q": cfg.q, "grid_distance": lat, "refined": float(d[0]), "error": float(err[0])}
        pairs = np.array([[p, q]])
    else:
        pairs = sample_distance_pairs(field, window, cfg.n_samples or 20, cfg.seed)
    with timer("table"):
        d, err = pairwise_distances(field, pairs[:, 0], pairs[:, 1], resolution=cfg.resolution, window=window)
    _write_rows(
        os.path.join(out, "distances.csv"),
        ["px", "py", "qx", "qy", "distance", "error"],
        [list(pr.ravel()) + [di, ei] for pr, di, ei in zip(pairs, d, err)],
    )
    with timer("sandwich"):
        rep = distance_convergence_experiment(field, cfg.eps, pairs, cfg.resolution, mollifier=cfg.mollifier)
    _write_rows(os.path.join(out, "distance_convergence.csv"), ["epsilon", "max_relative_deviation"], zip(rep.epsilon_schedule, rep.max_relative_deviation))
    results["convergence"] = rep.to_dict()
    return results, bool(rep.non_increasing)


def _multiplicity(field, p, q, resolution, out, stem):
    count, paths = minimizer_multiplicity(field, np.array(p, float), np.array(q, float), resolution)
    for i, path in enumerate(paths):
        _write_path(os.path.join(out, f"{stem}_{i}.csv"), path.points)
    return {
        "p": list(p),
        "q": list(q),
        "count": count,
        "lengths": [pa.length for pa in paths],
        "max_abs_x": [float(np.abs(pa.points[:, 0]).max()) for pa in paths],
    }


def _bvp(field, p, q, n_starts, seed, out, stem):
    sols = geodesic_bvp(field, np.array(p, float), np.array(q, float), n_starts, seed)
    for i, s in enumerate(sols):
        _write_path(os.path.join(out, f"{stem}_{i}.csv"), s.trajectory.points)
    return {
        "p": list(p),
        "q": list(q),
        "n_starts": n_starts,
        "solutions": len(sols),
        "lengths": [s.length for s in sols],
        "initial_velocities": [s.initial_velocity.tolist() for s in sols],
        "miss": [s.miss for s in sols],
    }


def run_geodesic(cfg, field, out, timer):
    default = "ivp" if cfg.v is not None else "multiplicity"
    task = _task(cfg, "geodesic", default)
    p = _need(cfg.p, "p", f"geodesic {task}")
    if task == "ivp":
        v = _need(cfg.v, "v", "geodesic ivp")
        with timer("ivp"):
            sol = geodesic_ivp(field, np.array(p, float), np.array(v, float), cfg.t_max, cfg.dt)
        _write_rows(os.path.join(out, "trajectory.csv"), ["t", "x", "y", "speed"], [[t, *pt, s] for t, pt, s in zip(sol.times, sol.trajectory.points, sol.speeds)])
        drift = float(np.abs(sol.speeds - sol.speeds[0]).max())
        return {"task": task, "exit_reason": sol.exit_reason, "length": sol.length, "end": sol.trajectory.points[-1].tolist(), "speed_drift": drift}, True
    q = _need(cfg.q, "q", f"geodesic {task}")
    if task == "bvp":
        with timer("bvp"):
            res = _bvp(field, p, q, cfg.n_starts, cfg.seed, out, "geodesic")
        return {"task": task, **res}, res["solutions"] > 0
    with timer("multiplicity"):
        res = _multiplicity(field, p, q, cfg.resolution, out, "minimizer")
    return {"task": task, **res}, True


def run_compare(cfg, field, out, timer):
    task = _task(cfg, "compare", "sweep")
    with timer("oracle"):
        oracle = cmp.oracle_for(field, cfg.region_rect, resolution=cfg.resolution)
    results = {"task": task, "oracle": type(oracle).__name__, "region": oracle.region.as_list()}
    if task == "critical":
        lo, hi = _need(cfg.bracket, "bracket", "compare critical")
        n = cfg.n_samples or 1000
        with timer("critical"):
            kc = cmp.critical_curvature_search(oracle, oracle.region, cfg.mode, lo, hi, n, cfg.seed)
        results.update({"mode": cfg.mode, "bracket": [lo, hi], "n_samples": n, "seed": cfg.seed, "critical_k": kc})
        return results, True
    k = _need(cfg.k, "k", f"compare {task}")
    if task == "radius":
        p = _need(cfg.p, "p", "compare radius")
        n = cfg.n_samples or 200
        with timer("radius"):
            r = cmp.comparison_radius_estimate(oracle, k, p, cfg.mode, n, cfg.seed)
        results.update({"mode": cfg.mode, "k": k, "p": p, "n_samples": n, "seed": cfg.seed, "radius": r, "cap": oracle.max_radius(p)})
        return results, True
    n = cfg.n_samples or 1000
    quads = cmp.sample_quadruples(oracle.region, n, cfg.seed, cfg.mode)
    with timer("verdicts"):
        batch = (cmp.cbb_batch if cfg.mode == "cbb" else cmp.cat_batch)(oracle, k, quads, seed=cfg.seed)
    batch.write_csv(os.path.join(out, "verdicts.csv"))
    batch.write_summary(os.path.join(out, "verdict_summary.json"))
    results["summary"] = batch.summary()
    return results, batch.failures_excluding_marginal() == 0


def _blowup(fn, lam, sign):
    x = np.logspace(-1, -6, 11)
    vals = fn(x, lam)
    return {"x": x.tolist(), "sectional": vals.tolist(), "extreme": float(sign * np.max(sign * vals))}


def run_example(cfg, field, out, timer):
    from .metrics import hw1_sectional, hw2_sectional

    name = _need(cfg.example, "example", "example")
    lam = cfg.lam
    results = {"example": name, "lambda": lam}
    if name == "hw2":
        f = make_hw2(lam)
        with timer("multiplicity"):
            results["multiplicity"] = _multiplicity(f, *HW2_EXAMPLE, EXAMPLE_RESOLUTION, out, "hw2_minimizer")
        with timer("bvp"):
            results["bvp"] = _bvp(f, *HW2_EXAMPLE, cfg.n_starts, cfg.seed, out, "hw2_geodesic")
        results["blowup"] = _blowup(hw2_sectional, lam, +1)
        return results, results["multiplicity"]["count"] == 2
    f = make_hw1(lam)
    with timer("multiplicity"):
        results["multiplicity"] = _multiplicity(f, *HW1_AXIS_EXAMPLE, EXAMPLE_RESOLUTION, out, "hw1_minimizer")
    with timer("bvp"):
        results["bvp"] = _bvp(f, *HW1_BVP_EXAMPLE, cfg.n_starts, cfg.seed, out, "hw1_geodesic")
    results["blowup"] = _blowup(hw1_sectional, lam, -1)
    ok = results["multiplicity"]["count"] == 1 and results["bvp"]["solutions"] == 1
    return results, ok


RUNNERS = {
    "curvature": run_curvature,
    "mollify": run_mollify,
    "distance": run_distance,
    "geodesic": run_geodesic,
    "compare": run_compare,
    "example": run_example,
}


def run(cfg: ExperimentConfig, subcommand: str):
    """Execute one subcommand; returns the report dict and the exit status."""
    field = parse_metric(cfg.metric)
    os.makedirs(cfg.out, exist_ok=True)
    timer = Timer()
    with timer("total"):
        results, passed = RUNNERS[subcommand](cfg, field, cfg.out, timer)
    report = {
        "subcommand": subcommand,
        "config": cfg.to_dict(),
        "results": results,
        "timings": timer.timings,
        "status": "pass" if passed else "fail",
    }
    return report, 0 if passed else 1
