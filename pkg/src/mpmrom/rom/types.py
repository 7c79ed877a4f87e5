"""Shared reduced-order-model data types and configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..boundary import BoundarySpec
from ..errors import ConfigError, ShapeError
from ..grid import BackgroundGrid
from ..manifold.anchor import GN_ARMIJO, GN_MAX_ITER, GN_SHRINK, GN_STEP_TOL
from ..manifold.decoder import CorrectionFields, DecoderNetwork
from ..materials import ConstitutiveParams
from ..particles import MaterialPointSet, Shape

QUADRATURE_MODES = ("lagrangian", "eulerian")
PROJECTION_MODES = ("position_velocity", "velocity_only")


@dataclass
class GaussNewtonConfig:
    tol: float = GN_STEP_TOL
    max_iter: int = GN_MAX_ITER
    shrink: float = GN_SHRINK
    armijo: float = GN_ARMIJO


@dataclass
class RomConfig:
    quadrature_mode: str = "lagrangian"
    projection_mode: str = "position_velocity"
    sample_count: int = 100
    min_per_boundary: int = 5
    ell: int = 2  # Eulerian points per cell per dimension
    gauss_newton: GaussNewtonConfig = field(default_factory=GaussNewtonConfig)
    resample_each_step: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.quadrature_mode not in QUADRATURE_MODES:
            raise ConfigError(f"quadrature_mode must be one of {QUADRATURE_MODES}")
        if self.projection_mode not in PROJECTION_MODES:
            raise ConfigError(f"projection_mode must be one of {PROJECTION_MODES}")
        if self.ell < 1:
            raise ConfigError("ell must be at least 1")
        if self.sample_count < 1:
            raise ConfigError("sample_count must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def validate_for(self, latent_dim: int, dim: int) -> None:
        # the projection must stay overdetermined: k*d >= r
        need = math.ceil(latent_dim / dim)
        if self.sample_count < need:
            raise ConfigError(
                f"sample_count {self.sample_count} underdetermines a {latent_dim}-dimensional latent state (need >= {need})"
            )


@dataclass
class RomScene:
    """Everything static over one reduced-order run."""

    decoder: DecoderNetwork
    corrections: CorrectionFields
    points0: MaterialPointSet  # seeded reference configuration
    grid: BackgroundGrid
    bc: BoundarySpec
    params: ConstitutiveParams
    ref_shape: Shape | None = None  # reference-domain membership (Eulerian mode)


@dataclass
class SampleSet:
    """Indices of the sample material points, interior plus boundary quota."""

    indices: np.ndarray  # sorted unique member indices
    boundary_indices: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indices.size != np.unique(self.indices).size:
            raise ShapeError("sample indices must be unique")

    @property
    def count(self) -> int:
        return int(self.indices.size)


@dataclass
class QuadratureSet:
    """Full-space state carried by the quadrature points of one step."""

    mass: np.ndarray  # (Q,)
    volume0: np.ndarray  # (Q,) reference volume, mass / rho0
    position: np.ndarray  # (Q, d)
    velocity: np.ndarray  # (Q, d)
    def_grad: np.ndarray  # (Q, d, d)
    active_nodes: np.ndarray  # sorted flat ids of the active basis set
    source: np.ndarray | None = None  # Lagrangian: particle index per point
    candidate_count: int = 0  # Eulerian: generated candidates before discard

    def __post_init__(self) -> None:
        q, d = self.position.shape
        if self.mass.shape != (q,) or self.velocity.shape != (q, d) or self.def_grad.shape != (q, d, d):
            raise ShapeError("inconsistent quadrature arrays")
        if np.any(self.mass <= 0.0):
            raise ShapeError("quadrature masses must be positive")

    @property
    def count(self) -> int:
        return int(self.mass.size)


@dataclass
class GeneralizedState:
    """Latent trajectory state: current, previous, and latent velocity."""

    x_hat: np.ndarray
    v_hat: np.ndarray
    x_hat_prev: np.ndarray
    t: float = 0.0
    step: int = 0

    @classmethod
    def initial(cls, corr: CorrectionFields) -> "GeneralizedState":
        return cls(corr.x_hat0.copy(), corr.v_hat0.copy(), corr.x_hat0.copy(), 0.0, 0)
