"""Clamped-beam MEMS with a thin dielectric layer and its reinforced (Robin) limit."""
from .boundary_data import BoundaryData, PermittivityProfile, default_grounded_family, series_capacitor_family
from .estimator import DeflectionEstimator
from .field_solver import PotentialField, solve_robin, solve_transmission
from .geometry import Deflection, DeviceConfig
from .mechanics import EnergyBreakdown, electrostatic_force, total_energy, total_gradient
from .optimizer import MinimizeOptions, MinimizeResult, minimize_total, project_obstacle

__version__ = "0.1.0"

__all__ = [
    "BoundaryData",
    "DeflectionEstimator",
    "Deflection",
    "DeviceConfig",
    "EnergyBreakdown",
    "MinimizeOptions",
    "MinimizeResult",
    "PermittivityProfile",
    "PotentialField",
    "default_grounded_family",
    "electrostatic_force",
    "minimize_total",
    "project_obstacle",
    "series_capacitor_family",
    "solve_robin",
    "solve_transmission",
    "total_energy",
    "total_gradient",
]
