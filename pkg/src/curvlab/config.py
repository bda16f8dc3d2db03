"""Experiment configuration: one flat JSON object, overridden by CLI flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

from .errors import ConfigError, CurvlabError
from .metrics import MetricField, Rect, parse_metric

SUBCOMMANDS = ("curvature", "mollify", "distance", "geodesic", "compare", "example")
TASKS = {
    "geodesic": ("multiplicity", "bvp", "ivp"),
    "compare": ("sweep", "radius", "critical"),
}


@dataclass
class ExperimentConfig:
    metric: str = "flat"
    region: Optional[List[float]] = None
    resolution: int = 81
    mollifier: str = "bump"
    eps: List[float] = field(default_factory=lambda: [0.1, 0.05, 0.025])
    mode: str = "cbb"
    k: Optional[float] = None
    direction: str = "lower"
    bracket: Optional[List[float]] = None
    n_samples: Optional[int] = None
    seed: int = 0
    tolerance: float = 1e-3
    out: str = "curvlab-out"
    task: Optional[str] = None
    example: Optional[str] = None
    lam: float = 1.5
    p: Optional[List[float]] = None
    q: Optional[List[float]] = None
    v: Optional[List[float]] = None
    t_max: float = 1.0
    dt: float = 1e-3
    n_starts: int = 32

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def region_rect(self) -> Optional[Rect]:
        return None if self.region is None else Rect(*self.region)


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def load_config(path: Optional[str], overrides: dict) -> ExperimentConfig:
    """Read the JSON file (if any), apply non-None overrides, reject unknown keys."""
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {path} is not valid JSON ({exc.msg} at line {exc.lineno})")
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be a JSON object")
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"config: unknown key(s) {', '.join(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**data)
    validate(cfg)
    return cfg


def _require(cond, name, msg):
    if not cond:
        raise ConfigError(f"config.{name}: {msg}")


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _point(cfg, name):
    val = getattr(cfg, name)
    if val is not None:
        _require(isinstance(val, list) and len(val) == 2 and all(map(_is_num, val)), name, "must be two numbers")


def validate(cfg: ExperimentConfig) -> MetricField:
    """Check every field against module preconditions; returns the parsed metric."""
    _require(isinstance(cfg.metric, str), "metric", "must be a string")
    try:
        metric = parse_metric(cfg.metric)
    except CurvlabError as exc:
        raise ConfigError(f"config.metric: {exc}")
    if cfg.region is not None:
        _require(isinstance(cfg.region, list) and len(cfg.region) == 4 and all(map(_is_num, cfg.region)), "region", "must be [x0, x1, y0, y1]")
        try:
            rect = Rect(*map(float, cfg.region))
        except CurvlabError as exc:
            raise ConfigError(f"config.region: {exc}")
        _require(metric.domain.contains_rect(rect), "region", f"must lie inside the chart {metric.domain.as_list()}")
    _require(isinstance(cfg.resolution, int) and not isinstance(cfg.resolution, bool) and cfg.resolution >= 32, "resolution", "must be an integer >= 32")
    _require(cfg.mollifier in ("bump", "wendland"), "mollifier", "must be 'bump' or 'wendland'")
    _require(isinstance(cfg.eps, list) and len(cfg.eps) >= 1 and all(_is_num(e) and e > 0 for e in cfg.eps), "eps", "must be a non-empty list of positive numbers")
    _require(all(b < a for a, b in zip(cfg.eps, cfg.eps[1:])), "eps", "must be strictly decreasing")
    _require(cfg.mode in ("cbb", "cat"), "mode", "must be 'cbb' or 'cat'")
    _require(cfg.k is None or _is_num(cfg.k), "k", "must be a number")
    _require(cfg.direction in ("lower", "upper"), "direction", "must be 'lower' or 'upper'")
    if cfg.bracket is not None:
        _require(isinstance(cfg.bracket, list) and len(cfg.bracket) == 2 and all(map(_is_num, cfg.bracket)) and cfg.bracket[0] < cfg.bracket[1], "bracket", "must be [k_lo, k_hi] with k_lo < k_hi")
    _require(cfg.n_samples is None or (isinstance(cfg.n_samples, int) and not isinstance(cfg.n_samples, bool) and cfg.n_samples >= 1), "n_samples", "must be a positive integer")
    _require(isinstance(cfg.seed, int) and not isinstance(cfg.seed, bool) and cfg.seed >= 0, "seed", "must be a non-negative integer")
    _require(_is_num(cfg.tolerance) and cfg.tolerance >= 0, "tolerance", "must be non-negative")
    _require(isinstance(cfg.out, str) and cfg.out != "", "out", "must be a directory path")
    _require(_is_num(cfg.lam) and 1.0 < cfg.lam < 2.0, "lam", "must lie in (1, 2)")
    for name in ("p", "q", "v"):
        _point(cfg, name)
    _require(_is_num(cfg.t_max) and cfg.t_max > 0, "t_max", "must be positive")
    _require(_is_num(cfg.dt) and 0 < cfg.dt <= cfg.t_max / 10, "dt", "must be positive and at most t_max/10")
    _require(isinstance(cfg.n_starts, int) and cfg.n_starts >= 4, "n_starts", "must be an integer >= 4")
    if cfg.example is not None:
        _require(cfg.example in ("hw1", "hw2"), "example", "must be 'hw1' or 'hw2'")
    if cfg.task is not None:
        allowed = sum(TASKS.values(), ())
        _require(cfg.task in allowed, "task", f"must be one of {', '.join(allowed)}")
    for name in ("p", "q"):
        val = getattr(cfg, name)
        if val is not None:
            _require(bool(metric.domain.contains(val)), name, f"must lie inside the chart {metric.domain.as_list()}")
    return metric
