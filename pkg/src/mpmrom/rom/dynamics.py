"""One full-space dynamics step driven by the quadrature points.

The quadrature set plays the role of the particle set in the full-order
transfers: scatter to the grid, update node velocities, then gather the
updated field back at the sample positions only.  Grid nodes outside the
union of sample stencils receive scatter contributions too, but nothing
reads them back, so the result equals the restriction to the active set.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..fom import grid_update, particle_to_grid
from ..particles import MaterialPointSet
from .types import QuadratureSet, RomScene


def full_space_dynamics(
    scene: RomScene,
    quad: QuadratureSet,
    sample_ref: np.ndarray,
    sample_pos: np.ndarray,
    dt: float,
    t: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Trial positions and velocities of the sample points after one step.

    Dirichlet sample points get their prescribed velocity exactly, the
    same overwrite the grid nodes receive.
    """
    qpts = MaterialPointSet(
        reference=quad.position,  # transfers never read the reference
        position=quad.position,
        velocity=quad.velocity,
        def_grad=quad.def_grad,
        mass=quad.mass,
        volume0=quad.volume0,
    )
    particle_to_grid(qpts, scene.grid, scene.params, scene.bc, t)
    grid_update(scene.grid, scene.bc, dt, t)

    base, fx = scene.grid.base_and_offset(sample_pos)
    v_trial, _ = kernels.g2p(base, fx, scene.grid.dx, scene.grid.strides, scene.grid.velocity)
    scene.bc.apply_to_particles(sample_ref, sample_pos, v_trial, t)
    x_trial = sample_pos + dt * v_trial
    return x_trial, v_trial
