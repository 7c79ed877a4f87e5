"""Offline training driver: initialization, scaling, ADAM loop, anchors."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NonConvergenceError
from ..manifold.anchor import initial_latent_fit
from ..manifold.checkpoint import ModelBundle
from ..manifold.decoder import DecoderNetwork, ScalingSpec, default_decoder
from ..manifold.encoder import EncoderNetwork, build_encoder
from .dataset import SnapshotDataset
from .loss import loss_and_gradients
from .optim import AdamState, adam_update, cosine_lr

LOG_FIELDS = ("step", "loss", "position", "def_grad", "velocity", "lr")


@dataclass
class TrainConfig:
    latent_dim: int
    steps: int = 2000
    lambda_f: float = 100.0
    lambda_v: float = 0.01
    seed: int = 0
    lr_start: float = 1e-3
    lr_end: float = 1e-6
    width: int = 30
    hidden: int = 4

    def __post_init__(self) -> None:
        if self.latent_dim < 1 or self.steps < 1:
            raise ConfigError("latent_dim and steps must be positive")
        if self.lambda_f < 0.0 or self.lambda_v < 0.0:
            raise ConfigError("penalty weights must be nonnegative")


def data_scaling(dataset: SnapshotDataset) -> ScalingSpec:
    """Min-max bounds from the reference configuration; output statistics
    from the training snapshots."""
    ref = dataset.ref_positions
    x_min = ref.min(axis=0)
    x_max = ref.max(axis=0)
    flat_span = x_max - x_min
    pad = np.where(flat_span <= 0.0, 1.0, 0.0)
    x_min, x_max = x_min - 0.5 * pad, x_max + 0.5 * pad
    train = dataset.train_indices
    if not train:
        raise ConfigError("dataset has no training instances")
    stack = np.concatenate([dataset.instances[i].positions.reshape(-1, dataset.dim) for i in train])
    mean = stack.mean(axis=0)
    std = np.maximum(stack.std(axis=0), 1e-8)
    return ScalingSpec(x_min, x_max, mean, std)


def write_training_log(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(LOG_FIELDS)
        w.writerows(rows)


def fit(
    dataset: SnapshotDataset,
    cfg: TrainConfig,
    dec: DecoderNetwork | None = None,
    enc: EncoderNetwork | None = None,
    log_path=None,
):
    """Train decoder and encoder on the dataset's training split.

    Each optimizer step uses every snapshot of one randomly drawn training
    instance (the velocity term needs within-trajectory successors).
    Returns (ModelBundle, log rows); the run is deterministic per seed.
    """
    rng = np.random.default_rng(cfg.seed)
    d, P = dataset.dim, dataset.particle_count
    if dec is None:
        dec = default_decoder(d, cfg.latent_dim, rng, data_scaling(dataset), width=cfg.width, hidden=cfg.hidden)
    if enc is None:
        enc = build_encoder(P * d, cfg.latent_dim, rng)
    train_ids = dataset.train_indices
    if not train_ids:
        raise ConfigError("dataset has no training instances")

    params = dec.parameters() + enc.parameters()
    state = AdamState.for_parameters(params)
    rows = []
    for step in range(cfg.steps):
        inst = dataset.instances[train_ids[int(rng.integers(len(train_ids)))]]
        loss, parts, dec_grads, enc_grads = loss_and_gradients(
            dec, enc, dataset.ref_positions,
            inst.positions, inst.velocities, inst.def_grads,
            dataset.dt, cfg.lambda_f, cfg.lambda_v,
        )
        if not np.isfinite(loss):
            raise NonConvergenceError(f"training diverged at step {step}: loss={loss}")
        lr = cosine_lr(step, cfg.steps, cfg.lr_start, cfg.lr_end)
        adam_update(params, dec_grads + enc_grads, state, lr)
        rows.append((step, loss, parts["position"], parts["def_grad"], parts["velocity"], lr))

    corr = initial_latent_fit(dec, dataset.ref_positions)
    bundle = ModelBundle(
        decoder=dec,
        encoder=enc,
        corrections=corr,
        particle_count=P,
        lambda_f=cfg.lambda_f,
        lambda_v=cfg.lambda_v,
        metadata={
            "seed": cfg.seed,
            "steps": cfg.steps,
            "latent_dim": cfg.latent_dim,
            "final_loss": rows[-1][1],
            "train_instances": len(train_ids),
            "dt": dataset.dt,
        },
    )
    if log_path is not None:
        write_training_log(log_path, rows)
    return bundle, rows
