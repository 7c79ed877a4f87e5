"""Kinematic boundary conditions and external body force."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# predicate over reference positions: (N, d) -> bool mask (N,)
RefPredicate = Callable[[np.ndarray], np.ndarray]
# predicate over spatial positions at time t (moving clamps track t)
NodePredicate = Callable[[np.ndarray, float], np.ndarray]
# prescribed velocity field: positions (N, d), t -> (N, d)
VelocityField = Callable[[np.ndarray, float], np.ndarray]
# body force density field: positions (N, d), t -> (N, d)  [N/m^3]
ForceField = Callable[[np.ndarray, float], np.ndarray]


@dataclass
class DirichletRegion:
    """One kinematic boundary region.

    ref_predicate selects member particles by reference position;
    node_predicate selects grid nodes by spatial position at time t
    (defaults to the reference predicate, which is correct for clamps
    that do not move through space).
    """

    ref_predicate: RefPredicate
    velocity: VelocityField
    node_predicate: NodePredicate | None = None
    name: str = ""

    def node_mask(self, positions: np.ndarray, t: float) -> np.ndarray:
        if self.node_predicate is not None:
            return np.asarray(self.node_predicate(positions, t), dtype=bool)
        return np.asarray(self.ref_predicate(positions), dtype=bool)


@dataclass
class BoundarySpec:
    """Dirichlet regions plus the external body force description.

    The full body force density is rho0 * gravity + extra_force(x, t);
    it enters the solver evaluated at particle positions.
    """

    dirichlet: list[DirichletRegion] = field(default_factory=list)
    gravity: np.ndarray | None = None
    extra_force: ForceField | None = None

    def body_force(self, positions: np.ndarray, t: float, rho0: float) -> np.ndarray:
        """Body force density b(x, t) in N/m^3 at the given positions."""
        b = np.zeros_like(positions)
        if self.gravity is not None:
            b += rho0 * np.asarray(self.gravity, dtype=np.float64)
        if self.extra_force is not None:
            b += self.extra_force(positions, t)
        return b

    def apply_to_grid(self, node_positions: np.ndarray, velocity: np.ndarray, t: float) -> None:
        """Overwrite grid node velocities inside each Dirichlet region."""
        for region in self.dirichlet:
            mask = region.node_mask(node_positions, t)
            if np.any(mask):
                velocity[mask] = region.velocity(node_positions[mask], t)

    def particle_members(self, reference: np.ndarray) -> list[np.ndarray]:
        """Per-region index arrays of member particles (reference test)."""
        return [np.where(np.asarray(r.ref_predicate(reference), dtype=bool))[0] for r in self.dirichlet]

    def apply_to_particles(self, reference: np.ndarray, positions: np.ndarray, velocity: np.ndarray, t: float) -> None:
        """Overwrite particle velocities for members of Dirichlet regions.

        Membership is decided on reference positions, the prescribed field
        is evaluated at the current positions.
        """
        for region in self.dirichlet:
            mask = np.asarray(region.ref_predicate(reference), dtype=bool)
            if np.any(mask):
                velocity[mask] = region.velocity(positions[mask], t)
