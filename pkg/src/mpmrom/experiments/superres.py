"""Resolution transfer: reuse a trained manifold on a finer point set.

The deformation map is a function of reference position, not of any
particular sampling, so a model trained at one seeding density can be
evaluated and stepped at another.  The comparison baseline advects the
fine points passively through the grid velocity field of the original
coarse full-order run, which is the standard way to upsample a particle
simulation without re-solving it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..fom import grid_update, particle_to_grid, grid_to_particle
from ..manifold.checkpoint import ModelBundle
from ..rom import RomConfig
from .driver import run_rom_instance
from .metrics import ErrorReport, position_error
from .scenarios import ScenarioSpec, build_instance, refine_spec, run_instance


@dataclass
class SuperresResult:
    spec_fine: ScenarioSpec
    rom_report: ErrorReport
    tracer_report: ErrorReport
    rom_positions: list = field(default_factory=list)
    tracer_positions: list = field(default_factory=list)
    truth_positions: list = field(default_factory=list)
    mus: list = field(default_factory=list)


def advect_tracers(
    spec: ScenarioSpec,
    mu,
    tracer_pos0: np.ndarray,
) -> np.ndarray:
    """Passive points carried by the coarse run's grid velocities.

    Tracers use the same gather-and-move rule as real material points,
    so when the tracer set IS the coarse point set the output reproduces
    the full-order trajectory bit for bit.
    Returns (steps+1, T, d) positions at the stored snapshot times.
    """
    scene = build_instance(spec, mu)
    pts = scene.points
    tracers = tracer_pos0.copy()
    S = spec.steps + 1
    out = np.empty((S, tracers.shape[0], tracers.shape[1]))
    out[0] = tracers
    sdt = spec.solver_dt
    for s in range(1, S):
        for k in range(spec.substeps):
            n = (s - 1) * spec.substeps + k
            t = n * sdt
            particle_to_grid(pts, scene.grid, spec.material, scene.bc, t)
            grid_update(scene.grid, scene.bc, sdt, t)
            base, fx = scene.grid.base_and_offset(tracers)
            v_tr, _ = kernels.g2p(base, fx, scene.grid.dx, scene.grid.strides, scene.grid.velocity)
            tracers += sdt * v_tr
            grid_to_particle(pts, scene.grid, sdt)
        out[s] = tracers
    return out


def _check_extrapolation(bundle: ModelBundle, X: np.ndarray) -> None:
    s = bundle.decoder.scaling
    if np.any(X < s.x_min) or np.any(X > s.x_max):
        frac = float(np.mean(np.any((X < s.x_min) | (X > s.x_max), axis=1)))
        warnings.warn(
            f"{frac:.1%} of the fine reference points lie outside the trained "
            "input range; the map is extrapolating there",
            stacklevel=2,
        )


def run_superres(
    spec: ScenarioSpec,
    bundle: ModelBundle,
    cfg: RomConfig,
    mus,
    factor: int = 2,
) -> SuperresResult:
    """Reduced run and tracer baseline at factor x the trained resolution.

    Ground truth is a fresh full-order run at the fine resolution.  Both
    approximations are scored against it with the usual position error.
    """
    spec_fine = refine_spec(spec, factor)
    truth_list, rom_list, tracer_list, mu_list = [], [], [], []
    for mu in mus:
        fine_scene = build_instance(spec_fine, mu)
        _check_extrapolation(bundle, fine_scene.points.reference)
        truth = run_instance(spec_fine, fine_scene)

        rom_pos, _, _ = run_rom_instance(spec_fine, mu, bundle, cfg)
        tracer_pos = advect_tracers(spec, mu, truth.reference.copy())

        truth_list.append(truth.positions)
        rom_list.append(rom_pos)
        tracer_list.append(tracer_pos)
        mu_list.append(tuple(float(v) for v in mu))

    rom_report = position_error(truth_list, rom_list, mu_list)
    tracer_report = position_error(truth_list, tracer_list, mu_list)
    rom_report.extra["resolution_factor"] = factor
    tracer_report.extra["resolution_factor"] = factor
    return SuperresResult(
        spec_fine=spec_fine,
        rom_report=rom_report,
        tracer_report=tracer_report,
        rom_positions=rom_list,
        tracer_positions=tracer_list,
        truth_positions=truth_list,
        mus=mu_list,
    )
