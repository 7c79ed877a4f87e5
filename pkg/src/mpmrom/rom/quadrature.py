"""Hyper-reduction quadrature: rebuild just enough full-space state.

Two strategies produce a QuadratureSet from the latent state:

lagrangian  keeps material points as quadrature points.  The sample set
            is completed with every other material point whose stencil
            touches an active node, so force and mass sums at the active
            nodes match the full-order sums exactly.

eulerian    tiles the cells covering the active-node supports with a
            fixed lattice of spatial points and pulls them back through
            the inverse deformation map, so the cost is independent of
            the material point count.
"""

from __future__ import annotations

import numpy as np

from ..errors import NonConvergenceError
from ..grid import BackgroundGrid, stencil_node_ids
from ..manifold.decoder import decode, decode_with_gradient, deformation_gradient, manifold_velocity
from ..manifold.invert import DEGENERATE, STALLED, invert_map_batch
from ..materials import DET_F_MIN
from .types import QuadratureSet, RomScene, SampleSet

# tolerated fraction of Eulerian candidates whose inversion fails outright
EULERIAN_FAIL_FRACTION = 0.1


def active_node_set(grid: BackgroundGrid, positions: np.ndarray) -> np.ndarray:
    """Sorted flat ids of grid nodes in the stencil of any position."""
    return np.unique(stencil_node_ids(grid, positions))


def lagrangian_quadrature(
    scene: RomScene,
    x_hat: np.ndarray,
    v_hat: np.ndarray,
    t: float,
    samples: SampleSet,
) -> QuadratureSet:
    """Material-point quadrature over the samples and their neighbors."""
    dec, corr, pts = scene.decoder, scene.corrections, scene.points0
    X_all = pts.reference
    pos_all = decode(dec, corr, X_all, x_hat, t)

    active = active_node_set(scene.grid, pos_all[samples.indices])

    other_mask = np.ones(pts.count, dtype=bool)
    other_mask[samples.indices] = False
    others = np.where(other_mask)[0]
    if others.size:
        stencils = stencil_node_ids(scene.grid, pos_all[others])
        touches = np.isin(stencils, active).any(axis=1)
        neighbors = others[touches]
    else:
        neighbors = others
    union = np.concatenate([samples.indices, neighbors])

    X = X_all[union]
    _, F = decode_with_gradient(dec, corr, X, x_hat, t)
    vel = manifold_velocity(dec, corr, X, x_hat, v_hat, t)
    return QuadratureSet(
        mass=pts.mass[union],
        volume0=pts.volume0[union],
        position=pos_all[union],
        velocity=vel,
        def_grad=F,
        active_nodes=active,
        source=union,
    )


def _support_cells(grid: BackgroundGrid, active: np.ndarray) -> np.ndarray:
    """Multi-indices of cells overlapping the active nodes' supports.

    A node's quadratic-spline support spans cells i-2 .. i+1 along each
    dimension; the result is clipped to cells that exist on the grid.
    """
    d = grid.dim
    node_idx = np.stack(np.unravel_index(active, grid.node_counts), axis=1)
    offsets = np.stack(np.meshgrid(*([np.arange(-2, 2)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    cells = (node_idx[:, None, :] + offsets[None, :, :]).reshape(-1, d)
    hi = np.asarray(grid.node_counts) - 2  # last valid cell index per dim
    cells = cells[np.all((cells >= 0) & (cells <= hi), axis=1)]
    return np.unique(cells, axis=0)


def _cell_lattice(grid: BackgroundGrid, cells: np.ndarray, ell: int) -> np.ndarray:
    """ell^d evenly spaced spatial points inside each cell."""
    d = grid.dim
    sub = (np.arange(ell) + 0.5) / ell
    local = np.stack(np.meshgrid(*([sub] * d), indexing="ij"), axis=-1).reshape(-1, d)
    corners = grid.origin[None, :] + cells * grid.dx
    return (corners[:, None, :] + local[None, :, :] * grid.dx).reshape(-1, d)


def eulerian_quadrature(
    scene: RomScene,
    x_hat: np.ndarray,
    v_hat: np.ndarray,
    t: float,
    samples: SampleSet,
    ell: int = 2,
) -> QuadratureSet:
    """Fixed spatial lattice restricted to the active-node supports.

    Candidate points are pulled back through the deformation map by
    Newton inversion seeded at their own spatial position (deformations
    between grid-scale snapshots are modest).  Stalled candidates are
    retried from the reference position of the nearest decoded sample.
    Candidates that leave the reference bounding box, land outside the
    reference shape, or invert to a non-positive volume ratio are
    discarded; outright inversion failures beyond a small fraction of
    the lattice abort the step.
    """
    if scene.ref_shape is None:
        raise ValueError("eulerian quadrature requires the scene's reference shape")
    dec, corr, pts = scene.decoder, scene.corrections, scene.points0
    rho0 = scene.params.density

    X_samp = pts.reference[samples.indices]
    pos_samp = decode(dec, corr, X_samp, x_hat, t)
    active = active_node_set(scene.grid, pos_samp)

    cells = _support_cells(scene.grid, active)
    cand = _cell_lattice(scene.grid, cells, ell)
    n_cand = cand.shape[0]
    weight = float(scene.grid.dx**scene.grid.dim) / ell**scene.grid.dim

    lo, hi = scene.ref_shape.lo, scene.ref_shape.hi
    X, ok, status = invert_map_batch(dec, corr, cand, x_hat, t, guess=cand, ref_lo=lo, ref_hi=hi)

    stalled = status == STALLED
    if np.any(stalled):
        # second attempt: seed from the nearest sample's reference position
        diff = cand[stalled][:, None, :] - pos_samp[None, :, :]
        nearest = np.argmin(np.einsum("qsd,qsd->qs", diff, diff), axis=1)
        X2, ok2, st2 = invert_map_batch(
            dec, corr, cand[stalled], x_hat, t, guess=X_samp[nearest], ref_lo=lo, ref_hi=hi
        )
        X[stalled], ok[stalled], status[stalled] = X2, ok2, st2

    failed = int(np.count_nonzero((status == STALLED) | (status == DEGENERATE)))
    keep = ok.copy()
    keep[keep] = scene.ref_shape.contains(X[keep])

    X_keep = X[keep]
    F = deformation_gradient(dec, corr, X_keep, x_hat, t)
    J = np.linalg.det(F)
    good = J > DET_F_MIN
    failed += int(np.count_nonzero(~good))
    if failed > EULERIAN_FAIL_FRACTION * n_cand:
        raise NonConvergenceError(
            f"deformation map inversion failed on {failed} of {n_cand} quadrature candidates"
        )
    X_keep, F, J = X_keep[good], F[good], J[good]
    pos = cand[keep][good]

    vel = manifold_velocity(dec, corr, X_keep, x_hat, v_hat, t)
    mass = rho0 * weight / J  # current density rho0/J times spatial volume
    return QuadratureSet(
        mass=mass,
        volume0=weight / J,
        position=pos,
        velocity=vel,
        def_grad=F,
        active_nodes=active,
        source=None,
        candidate_count=n_cand,
    )
