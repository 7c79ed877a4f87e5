"""Selection of the sample material points that drive each step."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .types import SampleSet


def sample_material_points(
    total: int,
    boundary_members: list,
    count: int,
    seed: int,
    step: int,
    min_per_boundary: int = 5,
) -> SampleSet:
    """Draw the sample set for one step.

    count indices are drawn uniformly without replacement from the
    interior (particles belonging to no kinematic boundary region), and
    every boundary region contributes at least min_per_boundary of its
    members so prescribed velocities stay represented.  The draw is a
    pure function of (seed, step).
    """
    members = [np.asarray(m, dtype=np.int64) for m in boundary_members]
    flat = np.concatenate(members) if members else np.empty(0, dtype=np.int64)
    interior = np.setdiff1d(np.arange(total, dtype=np.int64), flat)
    if count > interior.size:
        raise ConfigError(f"sample_count {count} exceeds the {interior.size} interior material points")

    rng = np.random.default_rng([seed, step])
    picks = [rng.choice(interior, size=count, replace=False)]
    boundary_picks = []
    quota = min_per_boundary
    for i, mem in enumerate(members):
        if mem.size < quota:
            raise ConfigError(
                f"boundary region {i} has {mem.size} member points, fewer than the quota of {quota}"
            )
        chosen = mem if mem.size == quota else rng.choice(mem, size=quota, replace=False)
        boundary_picks.append(np.sort(chosen))
        picks.append(chosen)
    indices = np.unique(np.concatenate(picks))
    return SampleSet(indices=indices, boundary_indices=boundary_picks)
