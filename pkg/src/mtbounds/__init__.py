"""Bounds on treatment-effect parameters in multiple-treatment selection
models with discrete instruments."""

__version__ = "0.1.0"

from .engine import (LambdaGrid, LambdaPoint, PointRecord, Problem,
                     SweepResult, run_point, run_sweep, union_intervals)
from .moments import MomentTable, moments_from_microdata
from .mtr_space import ShapeRestrictionSet
from .selection import PolicyShift, SelectionModel, Thresholds
from .targets import TargetSpec

__all__ = [
    "LambdaGrid", "LambdaPoint", "PointRecord", "Problem", "SweepResult",
    "run_point", "run_sweep", "union_intervals", "MomentTable",
    "moments_from_microdata", "ShapeRestrictionSet", "PolicyShift",
    "SelectionModel", "Thresholds", "TargetSpec",
]
