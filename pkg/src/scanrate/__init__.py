"""Rate estimation by log-log regression of block statistics along scans."""

__version__ = "0.1.0"

from .blockstats import Statistic, Trajectory, trajectory, trajectory_matrix
from .errors import ScanRateError
from .estimators import EstimateReport, EstimatorSpec, estimate, hill_estimate
from .ratemaps import get_map, invert_slope
from .scanmodel import ScanPath, direct_scan, reverse_scan, uniform_random_scan
from .simulate import InnovationSpec, ModelSpec, generate

__all__ = [
    "EstimateReport",
    "EstimatorSpec",
    "InnovationSpec",
    "ModelSpec",
    "ScanPath",
    "ScanRateError",
    "Statistic",
    "Trajectory",
    "direct_scan",
    "estimate",
    "generate",
    "get_map",
    "hill_estimate",
    "invert_slope",
    "reverse_scan",
    "trajectory",
    "trajectory_matrix",
    "uniform_random_scan",
]
