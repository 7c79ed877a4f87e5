"""Material point state and shape seeding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, ShapeError
from .grid import BackgroundGrid


@dataclass
class MaterialPointSet:
    """State arrays of the Lagrangian particles.

    reference   (P, d) seeded positions X (never mutated)
    position    (P, d) current positions x
    velocity    (P, d)
    def_grad    (P, d, d) deformation gradients F
    mass        (P,)
    volume0     (P,) reference volumes
    """

    reference: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    def_grad: np.ndarray
    mass: np.ndarray
    volume0: np.ndarray

    def __post_init__(self) -> None:
        P, d = self.reference.shape
        checks = {
            "position": (self.position, (P, d)),
            "velocity": (self.velocity, (P, d)),
            "def_grad": (self.def_grad, (P, d, d)),
            "mass": (self.mass, (P,)),
            "volume0": (self.volume0, (P,)),
        }
        for name, (arr, shape) in checks.items():
            if arr.shape != shape:
                raise ShapeError(f"{name} has shape {arr.shape}, expected {shape}")

    @property
    def count(self) -> int:
        return int(self.reference.shape[0])

    @property
    def dim(self) -> int:
        return int(self.reference.shape[1])

    def copy(self) -> "MaterialPointSet":
        return MaterialPointSet(
            self.reference.copy(),
            self.position.copy(),
            self.velocity.copy(),
            self.def_grad.copy(),
            self.mass.copy(),
            self.volume0.copy(),
        )


ShapePredicate = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Shape:
    """Reference-configuration body: membership predicate plus bounding box."""

    contains: ShapePredicate
    lo: np.ndarray
    hi: np.ndarray

    @property
    def dim(self) -> int:
        return int(np.asarray(self.lo).shape[0])


def box_shape(lo, hi) -> Shape:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)

    def contains(pts: np.ndarray) -> np.ndarray:
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    return Shape(contains, lo, hi)


def ball_shape(center, radius: float) -> Shape:
    """Disc in 2-D, ball in 3-D."""
    center = np.asarray(center, dtype=np.float64)

    def contains(pts: np.ndarray) -> np.ndarray:
        return np.sum((pts - center) ** 2, axis=1) <= radius**2

    return Shape(contains, center - radius, center + radius)


def cylinder_shape(base_center, radius: float, axis: int, length: float) -> Shape:
    """3-D cylinder along a coordinate axis starting at base_center."""
    base_center = np.asarray(base_center, dtype=np.float64)
    lo = base_center - radius
    hi = base_center + radius
    lo[axis] = base_center[axis]
    hi[axis] = base_center[axis] + length

    def contains(pts: np.ndarray) -> np.ndarray:
        radial = np.delete(pts - base_center, axis, axis=1)
        along = pts[:, axis] - base_center[axis]
        return (np.sum(radial**2, axis=1) <= radius**2) & (along >= 0.0) & (along <= length)

    return Shape(contains, lo, hi)


def seed_material_points(
    grid: BackgroundGrid,
    shape: Shape,
    params_density: float,
    points_per_cell_dim: int,
    initial_velocity: Callable[[np.ndarray], np.ndarray] | None = None,
) -> MaterialPointSet:
    """Fill a shape with particles on a regular per-cell sublattice.

    Each grid cell intersecting the shape's bounding box is tiled with
    points_per_cell_dim^d evenly spaced points; those inside the shape
    become particles with volume (dx / points_per_cell_dim)^d and mass
    rho0 * volume.  Deterministic: no randomness involved.
    """
    if points_per_cell_dim < 1:
        raise ConfigError("points_per_cell_dim must be >= 1")
    d = grid.dim
    if shape.dim != d:
        raise ShapeError(f"shape dim {shape.dim} != grid dim {d}")
    ppc = points_per_cell_dim
    sub = (np.arange(ppc) + 0.5) / ppc  # offsets within a cell, cell units

    lo_cell = np.floor((np.asarray(shape.lo) - grid.origin) / grid.dx).astype(np.int64)
    hi_cell = np.ceil((np.asarray(shape.hi) - grid.origin) / grid.dx).astype(np.int64)
    axes = []
    for k in range(d):
        cells = np.arange(lo_cell[k], hi_cell[k])
        coords = (cells[:, None] + sub[None, :]).ravel() * grid.dx + grid.origin[k]
        axes.append(coords)
    mesh = np.meshgrid(*axes, indexing="ij")
    candidates = np.stack([m.ravel() for m in mesh], axis=1)
    keep = shape.contains(candidates)
    X = candidates[keep]
    if X.shape[0] == 0:
        raise ConfigError("shape produced no particles on this grid")

    P = X.shape[0]
    vol = (grid.dx / ppc) ** d
    velocity = np.zeros((P, d)) if initial_velocity is None else np.asarray(initial_velocity(X), dtype=np.float64)
    if velocity.shape != (P, d):
        raise ShapeError(f"initial velocity field returned shape {velocity.shape}, expected {(P, d)}")
    F = np.broadcast_to(np.eye(d), (P, d, d)).copy()
    return MaterialPointSet(
        reference=X.copy(),
        position=X.copy(),
        velocity=velocity,
        def_grad=F,
        mass=np.full(P, params_density * vol),
        volume0=np.full(P, vol),
    )
