"""Finite-element realization of a Stokes fluid coupled to a thin and a thick elastic layer."""

__version__ = "0.1.0"

from .errors import (CompatibilityError, ConfigurationError, ConstraintViolationError, DimensionError,
                     GeometryError, MeshResolutionError, MultiFSIError, SolverError, TopologyError)
from .geometry import Box, GeometryConfig, Mesh, build_nested_mesh, interface_chart
from .fem import Discretization, FunctionSpaces, MaterialParams, StateVector, h_norm, project_to_H
from .stokes import solve_stokes_forced, solve_stokes_lifting
from .resolvent import estimate_inf_sup, monolithic_oracle, resolvent_apply
from .pressure import reconstruct_pressure
from .evolution import evolve, make_initial_datum

__all__ = [
    "Box", "GeometryConfig", "Mesh", "build_nested_mesh", "interface_chart",
    "Discretization", "FunctionSpaces", "MaterialParams", "StateVector", "h_norm", "project_to_H",
    "solve_stokes_forced", "solve_stokes_lifting",
    "estimate_inf_sup", "monolithic_oracle", "resolvent_apply",
    "reconstruct_pressure", "evolve", "make_initial_datum",
    "MultiFSIError", "ConfigurationError", "MeshResolutionError", "TopologyError", "GeometryError",
    "ConstraintViolationError", "CompatibilityError", "DimensionError", "SolverError",
]
