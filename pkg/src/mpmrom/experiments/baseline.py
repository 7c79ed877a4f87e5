"""Linear-manifold baseline: one identity layer instead of the deep map.

Everything else (scaling, corrections, encoder, loss, optimizer, random
seed) is shared with the nonlinear run, so the comparison isolates the
expressiveness of the manifold parameterization itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..manifold.checkpoint import ModelBundle
from ..manifold.decoder import DecoderNetwork, ScalingSpec
from ..manifold.mlp import xavier_layers
from ..training.dataset import SnapshotDataset
from ..training.fit import TrainConfig, data_scaling, fit
from .driver import reconstruction_report
from .metrics import ErrorReport


def linear_decoder(
    d: int, r: int, rng: np.random.Generator, scaling: ScalingSpec
) -> DecoderNetwork:
    layers = xavier_layers([d + r, d], ["identity"], rng)
    return DecoderNetwork(layers, d, r, scaling)


def train_linear(
    dataset: SnapshotDataset, cfg: TrainConfig, log_path=None
) -> tuple[ModelBundle, list]:
    rng = np.random.default_rng(cfg.seed)
    dec = linear_decoder(dataset.dim, cfg.latent_dim, rng, data_scaling(dataset))
    return fit(dataset, cfg, dec=dec, log_path=log_path)


@dataclass
class BaselineComparison:
    latent_dim: int
    nonlinear: ErrorReport
    linear: ErrorReport

    @property
    def nonlinear_wins(self) -> bool:
        return self.nonlinear.aggregate < self.linear.aggregate


def compare_manifolds(
    dataset: SnapshotDataset,
    cfg: TrainConfig,
    split: str = "test",
    nonlinear_bundle: ModelBundle | None = None,
) -> BaselineComparison:
    """Round-trip reconstruction error of deep vs single-layer manifolds.

    Both use the same latent dimension and training configuration; a
    pre-trained nonlinear bundle can be passed to avoid refitting it.
    """
    if nonlinear_bundle is None:
        nonlinear_bundle, _ = fit(dataset, cfg)
    linear_bundle, _ = train_linear(dataset, cfg)
    rep_nl = reconstruction_report(dataset, nonlinear_bundle, split)
    rep_li = reconstruction_report(dataset, linear_bundle, split)
    rep_nl.extra["manifold"] = "nonlinear"
    rep_li.extra["manifold"] = "linear"
    return BaselineComparison(cfg.latent_dim, rep_nl, rep_li)
