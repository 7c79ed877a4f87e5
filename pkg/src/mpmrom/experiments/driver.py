"""Glue between scenario datasets, trained models, and reduced runs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..manifold.checkpoint import ModelBundle
from ..manifold.decoder import deformation_gradient
from ..manifold.encoder import encode
from ..rom import RomConfig, RomResult, RomScene, decode_trajectory, simulate_rom
from ..training.dataset import SnapshotDataset, build_dataset
from .metrics import ErrorReport, position_error
from .scenarios import (
    ScenarioSpec,
    SceneInstance,
    build_instance,
    load_manifest,
    manifest_files,
    spec_from_dict,
)


def dataset_from_manifest(manifest_path) -> tuple[ScenarioSpec, SnapshotDataset]:
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    spec = spec_from_dict(manifest["scenario"])
    files = manifest_files(manifest, manifest_path.parent)
    return spec, build_dataset(files)


def rom_scene_for(spec: ScenarioSpec, mu, bundle: ModelBundle) -> RomScene:
    scene = build_instance(spec, mu)
    return RomScene(
        decoder=bundle.decoder,
        corrections=bundle.corrections,
        points0=scene.points,
        grid=scene.grid,
        bc=scene.bc,
        params=spec.material,
        ref_shape=scene.shape,
    )


def snapshot_indices(spec: ScenarioSpec) -> np.ndarray:
    return np.arange(spec.steps + 1) * spec.substeps


def at_snapshots(result: RomResult, spec: ScenarioSpec) -> RomResult:
    """Latent trajectory restricted to the stored-snapshot times."""
    idx = snapshot_indices(spec)
    return RomResult(
        x_hat=result.x_hat[idx],
        v_hat=result.v_hat[idx],
        times=result.times[idx],
        diagnostics=list(result.diagnostics),
    )


def run_rom_instance(
    spec: ScenarioSpec,
    mu,
    bundle: ModelBundle,
    cfg: RomConfig,
) -> tuple[np.ndarray, np.ndarray, RomResult]:
    """Reduced run of one instance, decoded at the snapshot times.

    The solver substeps exactly like the full-order generator, so the
    returned (steps+1, P, d) arrays align with the stored trajectories.
    """
    scene = rom_scene_for(spec, mu, bundle)
    result = simulate_rom(scene, cfg, spec.solver_dt, spec.steps * spec.substeps)
    thin = at_snapshots(result, spec)
    pos, vel = decode_trajectory(scene, thin)
    return pos, vel, result


def decode_def_grads(scene: RomScene, result: RomResult, points=None) -> np.ndarray:
    X = scene.points0.reference if points is None else np.atleast_2d(points)
    S = result.x_hat.shape[0]
    out = np.empty((S, X.shape[0], X.shape[1], X.shape[1]))
    for n in range(S):
        out[n] = deformation_gradient(
            scene.decoder, scene.corrections, X, result.x_hat[n], float(result.times[n])
        )
    return out


def rom_error_report(
    manifest_path,
    bundle: ModelBundle,
    cfg: RomConfig,
    split: str = "test",
) -> ErrorReport:
    """Reduced-vs-full position error over one split of a dataset."""
    spec, dataset = dataset_from_manifest(manifest_path)
    ids = dataset.split_indices(split)
    truths, approxs, mus = [], [], []
    for i in ids:
        inst = dataset.instances[i]
        pos, _, _ = run_rom_instance(spec, inst.mu, bundle, cfg)
        truths.append(inst.positions)
        approxs.append(pos)
        mus.append(inst.mu)
    report = position_error(truths, approxs, mus)
    report.extra["split"] = split
    report.extra["instances"] = len(ids)
    return report


def reconstruction_report(
    dataset: SnapshotDataset,
    bundle: ModelBundle,
    split: str = "test",
) -> ErrorReport:
    """Autoencoder round-trip error: encode each snapshot, decode, compare.

    Measures how well the manifold represents the data independently of
    the reduced dynamics.
    """
    from ..manifold.decoder import decode as decode_map

    dec, enc, corr = bundle.decoder, bundle.encoder, bundle.corrections
    X = dataset.ref_positions
    truths, approxs, mus = [], [], []
    for i in dataset.split_indices(split):
        inst = dataset.instances[i]
        latents = encode(enc, dec, inst.positions)
        recon = np.empty_like(inst.positions)
        for n in range(inst.snapshot_count):
            recon[n] = decode_map(dec, corr, X, latents[n], n * dataset.dt)
        truths.append(inst.positions)
        approxs.append(recon)
        mus.append(inst.mu)
    report = position_error(truths, approxs, mus)
    report.extra["split"] = split
    return report
