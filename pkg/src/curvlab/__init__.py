"""Numerical laboratory for curvature bounds of low-regularity 2-D metrics."""

from .errors import (
    BoundaryError,
    ConfigError,
    CurvlabError,
    DegeneracyError,
    DomainError,
    InadmissibleError,
)
from .metrics import MetricField, Rect, Regularity, parse_metric
from .model import ModelPlane, model_angle, model_side, model_triangle

__version__ = "0.1.0"

__all__ = [
    "BoundaryError",
    "ConfigError",
    "CurvlabError",
    "DegeneracyError",
    "DomainError",
    "InadmissibleError",
    "MetricField",
    "ModelPlane",
    "Rect",
    "Regularity",
    "model_angle",
    "model_side",
    "model_triangle",
    "parse_metric",
]
