"""Reduced-order time stepping: quadrature, dynamics, projection."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from ..manifold.decoder import decode, manifold_velocity
from .dynamics import full_space_dynamics
from .projection import project_position_velocity, project_velocity_only
from .quadrature import eulerian_quadrature, lagrangian_quadrature
from .sampling import sample_material_points
from .types import GeneralizedState, QuadratureSet, RomConfig, RomScene, SampleSet

DIAG_FIELDS = (
    "step",
    "t",
    "sample_count",
    "quadrature_count",
    "candidate_count",
    "gn_iterations",
    "gn_cost",
    "gn_converged",
    "time_quadrature",
    "time_dynamics",
    "time_projection",
    "time_total",
)


@dataclass
class StepDiagnostics:
    step: int
    t: float
    sample_count: int
    quadrature_count: int
    candidate_count: int
    gn_iterations: int
    gn_cost: float
    gn_converged: bool
    time_quadrature: float
    time_dynamics: float
    time_projection: float
    time_total: float

    def row(self) -> dict:
        return {name: getattr(self, name) for name in DIAG_FIELDS}


@dataclass
class RomResult:
    """Latent trajectory of one reduced run; index 0 is the initial state."""

    x_hat: np.ndarray  # (S + 1, r)
    v_hat: np.ndarray  # (S + 1, r)
    times: np.ndarray  # (S + 1,)
    diagnostics: list = field(default_factory=list)


def _boundary_members(scene: RomScene) -> list:
    return scene.bc.particle_members(scene.points0.reference)


def build_quadrature(
    scene: RomScene,
    cfg: RomConfig,
    state: GeneralizedState,
    samples: SampleSet,
    t: float,
) -> QuadratureSet:
    if cfg.quadrature_mode == "lagrangian":
        return lagrangian_quadrature(scene, state.x_hat, state.v_hat, t, samples)
    return eulerian_quadrature(scene, state.x_hat, state.v_hat, t, samples, ell=cfg.ell)


def rom_step(
    scene: RomScene,
    state: GeneralizedState,
    cfg: RomConfig,
    dt: float,
    samples: SampleSet | None = None,
    boundary_members: list | None = None,
) -> tuple[GeneralizedState, StepDiagnostics]:
    """Advance the latent state by one step of size dt."""
    t0 = time.perf_counter()
    t = state.step * dt  # matches the full-order convention t_n = n dt

    if samples is None:
        if boundary_members is None:
            boundary_members = _boundary_members(scene)
        samples = sample_material_points(
            scene.points0.count,
            boundary_members,
            cfg.sample_count,
            cfg.seed,
            state.step,
            cfg.min_per_boundary,
        )
    quad = build_quadrature(scene, cfg, state, samples, t)
    sample_ref = scene.points0.reference[samples.indices]
    if quad.source is not None:
        sample_pos = quad.position[: samples.count]
    else:
        sample_pos = decode(scene.decoder, scene.corrections, sample_ref, state.x_hat, t)
    t1 = time.perf_counter()

    x_trial, v_trial = full_space_dynamics(scene, quad, sample_ref, sample_pos, dt, t)
    t2 = time.perf_counter()

    if cfg.projection_mode == "velocity_only":
        x_next, v_next = project_velocity_only(scene.decoder, sample_ref, state.x_hat, v_trial, dt)
        gn_iters, gn_cost, gn_ok = 0, 0.0, True
    else:
        x_next, v_next, res = project_position_velocity(
            scene.decoder,
            scene.corrections,
            sample_ref,
            x_trial,
            v_trial,
            state.x_hat,
            state.x_hat_prev,
            t + dt,
            cfg.gauss_newton,
        )
        gn_iters, gn_cost, gn_ok = res.iterations, res.cost, res.converged
    t3 = time.perf_counter()

    new_state = GeneralizedState(
        x_hat=x_next,
        v_hat=v_next,
        x_hat_prev=state.x_hat.copy(),
        t=(state.step + 1) * dt,
        step=state.step + 1,
    )
    diag = StepDiagnostics(
        step=state.step,
        t=t,
        sample_count=samples.count,
        quadrature_count=quad.count,
        candidate_count=quad.candidate_count,
        gn_iterations=gn_iters,
        gn_cost=gn_cost,
        gn_converged=gn_ok,
        time_quadrature=t1 - t0,
        time_dynamics=t2 - t1,
        time_projection=t3 - t2,
        time_total=t3 - t0,
    )
    return new_state, diag


def simulate_rom(
    scene: RomScene,
    cfg: RomConfig,
    dt: float,
    n_steps: int,
) -> RomResult:
    """Run n_steps of the reduced model from the anchor state."""
    cfg.validate_for(scene.decoder.latent_dim, scene.decoder.dim)
    members = _boundary_members(scene)
    state = GeneralizedState.initial(scene.corrections)

    samples = None
    if not cfg.resample_each_step:
        samples = sample_material_points(
            scene.points0.count, members, cfg.sample_count, cfg.seed, 0, cfg.min_per_boundary
        )

    r = scene.decoder.latent_dim
    x_hat = np.empty((n_steps + 1, r))
    v_hat = np.empty((n_steps + 1, r))
    x_hat[0], v_hat[0] = state.x_hat, state.v_hat
    diags = []
    for n in range(n_steps):
        state, diag = rom_step(scene, state, cfg, dt, samples=samples, boundary_members=members)
        x_hat[n + 1], v_hat[n + 1] = state.x_hat, state.v_hat
        diags.append(diag)
    times = dt * np.arange(n_steps + 1)
    return RomResult(x_hat=x_hat, v_hat=v_hat, times=times, diagnostics=diags)


def decode_trajectory(
    scene: RomScene,
    result: RomResult,
    points: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Decoded positions and velocities at every recorded latent state.

    points defaults to the scene's full reference set; pass any other
    reference locations to evaluate the map elsewhere (the representation
    is independent of the seeding resolution).
    """
    X = scene.points0.reference if points is None else np.atleast_2d(points)
    S = result.x_hat.shape[0]
    pos = np.empty((S, X.shape[0], X.shape[1]))
    vel = np.empty_like(pos)
    for n in range(S):
        t = float(result.times[n])
        pos[n] = decode(scene.decoder, scene.corrections, X, result.x_hat[n], t)
        vel[n] = manifold_velocity(scene.decoder, scene.corrections, X, result.x_hat[n], result.v_hat[n], t)
    return pos, vel


def write_diagnostics(path, diags: list) -> None:
    """Per-step diagnostics as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=DIAG_FIELDS)
        writer.writeheader()
        for diag in diags:
            writer.writerow(diag.row())
