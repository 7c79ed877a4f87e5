"""Explicit material point method stepping (symplectic Euler, PIC transfers).

One step from t to t + dt:
  1. transfer mass, momentum, and force to grid nodes (quadratic B-splines)
  2. update node velocities from forces, overwrite Dirichlet nodes
  3. gather velocities back, update particle deformation gradients and
     positions with the gathered field

Internal force uses the fixed corotated Cauchy stress weighted by current
particle volume; external force is the body force density times current
volume.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .boundary import BoundarySpec
from .errors import InvertedElementError
from .grid import BackgroundGrid
from .materials import DET_F_MIN, ConstitutiveParams, first_piola_stress
from .particles import MaterialPointSet

CFL_SAFETY = 0.5


def stable_dt(params: ConstitutiveParams, dx: float, safety: float = CFL_SAFETY) -> float:
    """Largest time step satisfying the elastic wave CFL bound."""
    mu, lam = params.lame
    wave_speed = np.sqrt((lam + 2.0 * mu) / params.density)
    return safety * dx / wave_speed


def _node_positions(grid: BackgroundGrid) -> np.ndarray:
    pos = getattr(grid, "_node_pos_cache", None)
    if pos is None or pos.shape[0] != grid.n_nodes:
        pos = grid.node_positions()
        grid._node_pos_cache = pos
    return pos


def _ensure_momentum(grid: BackgroundGrid) -> np.ndarray:
    mom = getattr(grid, "_momentum", None)
    if mom is None or mom.shape != (grid.n_nodes, grid.dim):
        mom = np.zeros((grid.n_nodes, grid.dim))
        grid._momentum = mom
    return mom


def stress_volume(def_grad: np.ndarray, volume0: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """Matrix weighting the weight gradient in the internal force.

    Equals current volume times Cauchy stress: V0 * P(F) F^T (the J factors
    cancel).  def_grad is (N, d, d), volume0 (N,).
    """
    P = first_piola_stress(def_grad, mu, lam)
    return volume0[:, None, None] * (P @ def_grad.transpose(0, 2, 1))


def particle_to_grid(
    points: MaterialPointSet,
    grid: BackgroundGrid,
    params: ConstitutiveParams,
    bc: BoundarySpec,
    t: float,
) -> None:
    """Scatter mass, momentum, and nodal forces; zeroes grid state first."""
    mu, lam = params.lame
    J = np.linalg.det(points.def_grad)
    if np.any(J <= DET_F_MIN):
        raise InvertedElementError(f"inverted element: min det(F) = {J.min():.3e}")
    base, fx = grid.base_and_offset(points.position)
    svol = stress_volume(points.def_grad, points.volume0, mu, lam)
    b = bc.body_force(points.position, t, params.density)
    bvol = (J * points.volume0)[:, None] * b
    mom = _ensure_momentum(grid)
    grid.mass[:] = 0.0
    mom[:] = 0.0
    grid.force[:] = 0.0
    kernels.p2g(
        base,
        fx,
        grid.dx,
        grid.strides,
        points.mass,
        points.velocity,
        svol,
        bvol,
        grid.mass,
        mom,
        grid.force,
    )


def grid_update(grid: BackgroundGrid, bc: BoundarySpec, dt: float, t: float) -> None:
    """Node velocity update plus Dirichlet overwrite at time t."""
    mom = _ensure_momentum(grid)
    massive = grid.mass > 0.0
    grid.velocity[:] = 0.0
    inv_m = 1.0 / grid.mass[massive]
    grid.velocity[massive] = (mom[massive] + dt * grid.force[massive]) * inv_m[:, None]
    bc.apply_to_grid(_node_positions(grid), grid.velocity, t)


def grid_to_particle(
    points: MaterialPointSet,
    grid: BackgroundGrid,
    dt: float,
) -> None:
    """Gather velocities, update F multiplicatively, advect positions."""
    base, fx = grid.base_and_offset(points.position)
    vel, grad_v = kernels.g2p(base, fx, grid.dx, grid.strides, grid.velocity)
    d = points.dim
    points.def_grad[:] = (np.eye(d) + dt * grad_v) @ points.def_grad
    points.velocity[:] = vel
    points.position += dt * vel


def step_fom(
    points: MaterialPointSet,
    grid: BackgroundGrid,
    params: ConstitutiveParams,
    bc: BoundarySpec,
    dt: float,
    t: float,
) -> None:
    """Advance the coupled particle/grid state from t to t + dt in place."""
    particle_to_grid(points, grid, params, bc, t)
    grid_update(grid, bc, dt, t)
    grid_to_particle(points, grid, dt)


def simulate(
    points: MaterialPointSet,
    grid: BackgroundGrid,
    params: ConstitutiveParams,
    bc: BoundarySpec,
    dt: float,
    n_steps: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run n_steps and record the state after every step.

    Returns (positions, velocities, def_grads) of shape (n_steps + 1, P, d),
    (n_steps + 1, P, d), (n_steps + 1, P, d, d); index 0 is the initial
    state.
    """
    P, d = points.position.shape
    positions = np.empty((n_steps + 1, P, d))
    velocities = np.empty((n_steps + 1, P, d))
    def_grads = np.empty((n_steps + 1, P, d, d))
    positions[0] = points.position
    velocities[0] = points.velocity
    def_grads[0] = points.def_grad
    for n in range(n_steps):
        step_fom(points, grid, params, bc, dt, n * dt)
        positions[n + 1] = points.position
        velocities[n + 1] = points.velocity
        def_grads[n + 1] = points.def_grad
    return positions, velocities, def_grads
