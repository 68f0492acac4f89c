"""Constant-energy trajectories and periodic orbits of conservative mechanical
systems as geodesics of the Jacobi metric, demonstrated on the gravity double
pendulum."""

__version__ = "0.1.0"

from .model import Linearization, MechParams, State
from .geometry import (
    ArcLength,
    ChristoffelEval,
    ConstantMetric,
    EuclideanMetric,
    JacobiMetric,
    MetricEval,
    MetricField,
    SphereChartMetric,
    arc_length,
    christoffel,
    geodesic_residual,
    jacobi_metric,
    reconstruct_time,
    reconstruct_velocity,
)
from .relaxation import (
    DiscreteString,
    LoopSeed,
    RelaxOptions,
    RelaxReport,
    init_closed_string,
    init_open_string,
    relax,
    relax_step_explicit,
    relax_step_implicit,
    winding_number,
    winding_of_path,
)
from .integrate import (
    Trajectory,
    brake_speed_threshold,
    detect_brake_points,
    path_deviation,
    propagate,
    rk4_step,
    section_crossings,
    simulate,
)

__all__ = [
    "ArcLength",
    "ChristoffelEval",
    "ConstantMetric",
    "DiscreteString",
    "EuclideanMetric",
    "JacobiMetric",
    "Linearization",
    "LoopSeed",
    "MechParams",
    "MetricEval",
    "MetricField",
    "RelaxOptions",
    "RelaxReport",
    "SphereChartMetric",
    "State",
    "Trajectory",
    "arc_length",
    "brake_speed_threshold",
    "christoffel",
    "detect_brake_points",
    "geodesic_residual",
    "init_closed_string",
    "init_open_string",
    "jacobi_metric",
    "path_deviation",
    "propagate",
    "reconstruct_time",
    "reconstruct_velocity",
    "relax",
    "relax_step_explicit",
    "relax_step_implicit",
    "rk4_step",
    "section_crossings",
    "simulate",
    "winding_number",
    "winding_of_path",
]
