"""Change-point detection for continuous benchmarking series."""

__version__ = "0.1.0"

from .edivisive import best_split, detect, divergence, permutation_pvalue
from .model import (
    ChangePoint,
    DetectionConfig,
    MeasurementPoint,
    Series,
    StatTestResult,
    append_point,
    make_series_key,
)
from .stats import paired_t_test, shapiro_wilk, student_t_sf, welch_t_test

__all__ = [
    "ChangePoint",
    "DetectionConfig",
    "MeasurementPoint",
    "Series",
    "StatTestResult",
    "append_point",
    "best_split",
    "detect",
    "divergence",
    "make_series_key",
    "paired_t_test",
    "permutation_pvalue",
    "shapiro_wilk",
    "student_t_sf",
    "welch_t_test",
]
