"""Projection-based reduced-order dynamics on the learned manifold."""

from .dynamics import full_space_dynamics
from .projection import project_position_velocity, project_velocity, project_velocity_only
from .quadrature import active_node_set, eulerian_quadrature, lagrangian_quadrature
from .sampling import sample_material_points
from .stepper import (
    DIAG_FIELDS,
    RomResult,
    StepDiagnostics,
    build_quadrature,
    decode_trajectory,
    rom_step,
    simulate_rom,
    write_diagnostics,
)
from .types import (
    GaussNewtonConfig,
    GeneralizedState,
    QuadratureSet,
    RomConfig,
    RomScene,
    SampleSet,
)

__all__ = [
    "DIAG_FIELDS",
    "GaussNewtonConfig",
    "GeneralizedState",
    "QuadratureSet",
    "RomConfig",
    "RomResult",
    "RomScene",
    "SampleSet",
    "StepDiagnostics",
    "active_node_set",
    "build_quadrature",
    "decode_trajectory",
    "eulerian_quadrature",
    "full_space_dynamics",
    "lagrangian_quadrature",
    "project_position_velocity",
    "project_velocity",
    "project_velocity_only",
    "rom_step",
    "sample_material_points",
    "simulate_rom",
    "write_diagnostics",
]
