"""In-memory snapshot datasets assembled from trajectory files."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..io import read_trajectory


@dataclass
class TrajectoryInstance:
    """One parameter instance: every stored snapshot of one simulation."""

    mu: tuple[float, ...]
    positions: np.ndarray  # (S, P, d)
    velocities: np.ndarray  # (S, P, d)
    def_grads: np.ndarray  # (S, P, d, d)
    split: str = "train"

    @property
    def snapshot_count(self) -> int:
        return self.positions.shape[0]


@dataclass
class SnapshotDataset:
    ref_positions: np.ndarray  # (P, d) shared across instances
    dt: float
    instances: list[TrajectoryInstance] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.ref_positions.shape[1]

    @property
    def particle_count(self) -> int:
        return self.ref_positions.shape[0]

    def split_indices(self, split: str) -> list[int]:
        return [i for i, inst in enumerate(self.instances) if inst.split == split]

    @property
    def train_indices(self) -> list[int]:
        return self.split_indices("train")

    @property
    def test_indices(self) -> list[int]:
        return self.split_indices("test")


def build_dataset(paths, splits: dict | None = None) -> SnapshotDataset:
    """Load trajectory files into one dataset.

    All files must agree on dimension, particle count, time step, and the
    reference configuration.  The split label comes from each file's
    metadata (key "split"), overridable per path through `splits`.
    Instances are ordered by parameter vector so the dataset layout does
    not depend on the order the files were passed in.
    """
    paths = list(paths)
    if not paths:
        raise ConfigError("no trajectory files given")
    entries = []
    ref = dt = None
    for p in paths:
        traj = read_trajectory(p)
        if ref is None:
            ref, dt = traj.reference, traj.dt
        else:
            if traj.reference.shape != ref.shape:
                raise ShapeError(f"{p}: particle layout differs from {paths[0]}")
            if not np.array_equal(traj.reference, ref):
                raise ShapeError(f"{p}: reference configuration differs from {paths[0]}")
            if traj.dt != dt:
                raise ShapeError(f"{p}: dt {traj.dt} differs from {dt}")
        split = (splits or {}).get(str(p), traj.metadata.get("split", "train"))
        if split not in ("train", "test"):
            raise ConfigError(f"{p}: unknown split label {split!r}")
        mu = tuple(float(v) for v in traj.mu)
        entries.append(TrajectoryInstance(mu, traj.positions, traj.velocities, traj.def_grads, split))
    entries.sort(key=lambda e: e.mu)
    return SnapshotDataset(ref_positions=ref, dt=float(dt), instances=entries)
