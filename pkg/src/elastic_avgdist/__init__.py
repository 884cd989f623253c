"""Fit curves to weighted point clouds by minimizing a bending-penalized average-distance energy."""

__version__ = "0.1.0"

from .geometry import (
    EnergyParams,
    Polyline,
    ProjectionAssignment,
    WeightedPointCloud,
    curve_metric,
    discrete_curvature_term,
    length,
    project_cloud,
    resample,
    signed_curvatures,
    turning_angles,
)
from .energy import EnergyBreakdown, best_singleton, fd_gradient, gradient, total_energy
from .optimizer import FitConfig, FitReport, SweepPoint, epsilon_sweep, init_segment, max_abs_curvature, minimize

__all__ = [
    "EnergyParams",
    "Polyline",
    "ProjectionAssignment",
    "WeightedPointCloud",
    "curve_metric",
    "discrete_curvature_term",
    "length",
    "project_cloud",
    "resample",
    "signed_curvatures",
    "turning_angles",
    "EnergyBreakdown",
    "best_singleton",
    "fd_gradient",
    "gradient",
    "total_energy",
    "FitConfig",
    "FitReport",
    "SweepPoint",
    "epsilon_sweep",
    "init_segment",
    "max_abs_curvature",
    "minimize",
]
