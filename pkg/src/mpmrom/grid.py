"""Background Eulerian grid and quadratic B-spline interpolation.

Each point interacts with a 3^d block of nodes.  With u the signed distance
from a node in cell units, the 1-D weight is

    N(u) = 3/4 - u^2          for |u| < 1/2
    N(u) = (3/2 - |u|)^2 / 2  for 1/2 <= |u| < 3/2
    N(u) = 0                  otherwise

and the tensor-product weight is the product over dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OutOfDomainError


@dataclass
class BackgroundGrid:
    """Regular grid of nodes spaced `dx` apart starting at `origin`.

    node_counts holds the number of nodes per dimension; node (i_1..i_d)
    sits at origin + i * dx.  Node state arrays are flat (n_nodes, ...) in
    C order of the multi-index.
    """

    origin: np.ndarray
    dx: float
    node_counts: np.ndarray

    mass: np.ndarray = field(init=False, repr=False)
    velocity: np.ndarray = field(init=False, repr=False)
    force: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.node_counts = np.asarray(self.node_counts, dtype=np.int64)
        if self.dx <= 0.0:
            raise ConfigError(f"grid spacing must be positive, got {self.dx}")
        if self.origin.ndim != 1 or self.origin.shape != self.node_counts.shape:
            raise ConfigError("origin and node_counts must be 1-D arrays of equal length")
        if self.dim not in (2, 3):
            raise ConfigError(f"only 2-D and 3-D grids supported, got d={self.dim}")
        if np.any(self.node_counts < 4):
            raise ConfigError("need at least 4 nodes per dimension")
        self.mass = np.zeros(self.n_nodes)
        self.velocity = np.zeros((self.n_nodes, self.dim))
        self.force = np.zeros((self.n_nodes, self.dim))

    @property
    def dim(self) -> int:
        return int(self.origin.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_counts))

    @property
    def strides(self) -> np.ndarray:
        """Flattening strides of the node multi-index (C order)."""
        c = self.node_counts
        s = np.ones_like(c)
        for k in range(self.dim - 2, -1, -1):
            s[k] = s[k + 1] * c[k + 1]
        return s

    def node_positions(self) -> np.ndarray:
        """(n_nodes, d) array of node coordinates in C order."""
        axes = [self.origin[k] + self.dx * np.arange(self.node_counts[k]) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def zero_state(self) -> None:
        self.mass[:] = 0.0
        self.velocity[:] = 0.0
        self.force[:] = 0.0

    def base_and_offset(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Lowest stencil node per point and the cell-unit offset from it.

        x may be (d,) or (N, d).  The offset lies in [0.5, 1.5) per dim for
        in-bounds points.  Raises OutOfDomainError if any stencil node falls
        outside the grid.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = x[None] if single else x
        rel = (xb - self.origin) / self.dx
        base = np.floor(rel - 0.5).astype(np.int64)
        if np.any(base < 0) or np.any(base + 2 >= self.node_counts):
            bad = np.where(np.any((base < 0) | (base + 2 >= self.node_counts), axis=1))[0]
            raise OutOfDomainError(
                f"{bad.size} point(s) outside the background grid (first at index {bad[0]})"
            )
        fx = rel - base
        if single:
            return base[0], fx[0]
        return base, fx


def bspline_weights_1d(fx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weights and d/du derivatives of the three stencil nodes per axis.

    fx is the offset from the base node in cell units, shape (..., d),
    fx in [0.5, 1.5).  Returns (w, dw) each of shape (3, ..., d); entry k
    belongs to stencil node base+k, derivative is w.r.t. position in cell
    units (caller divides by dx).
    """
    w = np.stack(
        [
            0.5 * (1.5 - fx) ** 2,
            0.75 - (fx - 1.0) ** 2,
            0.5 * (fx - 0.5) ** 2,
        ]
    )
    dw = np.stack(
        [
            fx - 1.5,
            -2.0 * (fx - 1.0),
            fx - 0.5,
        ]
    )
    return w, dw


def _stencil_offsets(dim: int) -> np.ndarray:
    """(3^d, d) integer offsets of the stencil block, C order."""
    grids = np.meshgrid(*([np.arange(3)] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def stencil_node_ids(grid: BackgroundGrid, x: np.ndarray) -> np.ndarray:
    """Flat node indices of each point's quadratic stencil: (N, 3^d)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    base, _ = grid.base_and_offset(x)
    return (base[:, None, :] + _stencil_offsets(grid.dim)[None]) @ grid.strides


def bspline_weights(grid: BackgroundGrid, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stencil of one point: flat node indices, weights, weight gradients.

    Returns (nodes, w, grad) with shapes (3^d,), (3^d,), (3^d, d); grad is
    the spatial gradient of the tensor-product weight (units 1/m).  Weights
    over the stencil sum to one and gradients sum to zero.
    """
    base, fx = grid.base_and_offset(np.asarray(x, dtype=np.float64))
    w1, dw1 = bspline_weights_1d(fx)  # (3, d)
    offs = _stencil_offsets(grid.dim)  # (3^d, d)
    dims = np.arange(grid.dim)
    wd = w1[offs, dims]  # (3^d, d) per-axis weights
    dwd = dw1[offs, dims]
    w = np.prod(wd, axis=1)
    grad = np.empty((offs.shape[0], grid.dim))
    for j in range(grid.dim):
        parts = wd.copy()
        parts[:, j] = dwd[:, j]
        grad[:, j] = np.prod(parts, axis=1)
    grad /= grid.dx
    nodes = (base + offs) @ grid.strides
    return nodes, w, grad
