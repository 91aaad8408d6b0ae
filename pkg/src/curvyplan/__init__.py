"""Lane-change planning on curved roads: risk fields, Frenet quintics and a swarm optimizer."""

from .geometry import (
    FrenetState,
    ReferencePath,
    SystemState,
    VehicleState,
    build_reference_path,
    circle_path,
    frenet_to_global,
    global_to_frenet,
    project_to_path,
)
from .optimizer import SwarmConfig, optimize
from .riskfield import FieldParams, total_field
from .trajectory import BoundaryConditions, QuinticTrajectory, solve_quintic

__version__ = "0.1.0"

__all__ = [
    "BoundaryConditions", "FieldParams", "FrenetState", "QuinticTrajectory", "ReferencePath",
    "SwarmConfig", "SystemState", "VehicleState", "build_reference_path", "circle_path",
    "frenet_to_global", "global_to_frenet", "optimize", "project_to_path", "solve_quintic",
    "total_field",
]
