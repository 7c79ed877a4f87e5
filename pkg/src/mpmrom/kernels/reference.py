"""Pure-numpy reference implementation of the hot kernels.

The compiled extension (mpmrom.kernels._core) mirrors these signatures
exactly; equivalence is covered by tests.  Everything here is vectorized
but allocation-heavy, which is what the Cython twins avoid.
"""

from __future__ import annotations

import numpy as np

from ..grid import _stencil_offsets, bspline_weights_1d


def _stencil_data(base: np.ndarray, fx: np.ndarray, dx: float, strides: np.ndarray):
    """Per-particle stencil nodes, weights, and weight gradients.

    base, fx: (N, d) from BackgroundGrid.base_and_offset.
    Returns nodes (N, 3^d) int64, w (N, 3^d), grad (N, 3^d, d).
    """
    N, d = base.shape
    w1, dw1 = bspline_weights_1d(fx)  # (3, N, d)
    w1 = np.moveaxis(w1, 0, 1)  # (N, 3, d)
    dw1 = np.moveaxis(dw1, 0, 1)
    offs = _stencil_offsets(d)  # (M, d)
    dims = np.arange(d)
    wd = w1[:, offs, dims]  # (N, M, d)
    dwd = dw1[:, offs, dims]
    w = np.prod(wd, axis=2)
    grad = np.empty((N, offs.shape[0], d))
    for j in range(d):
        parts = wd.copy()
        parts[:, :, j] = dwd[:, :, j]
        grad[:, :, j] = np.prod(parts, axis=2)
    grad /= dx
    nodes = (base[:, None, :] + offs[None, :, :]) @ strides
    return nodes, w, grad


def p2g(
    base: np.ndarray,
    fx: np.ndarray,
    dx: float,
    strides: np.ndarray,
    mass_p: np.ndarray,
    vel_p: np.ndarray,
    stress_vol: np.ndarray,
    body_vol: np.ndarray,
    grid_mass: np.ndarray,
    grid_mom: np.ndarray,
    grid_frc: np.ndarray,
) -> None:
    """Scatter particle mass, momentum, and forces to grid nodes.

    stress_vol[p] is the matrix multiplying the weight gradient in the
    internal force (current volume times Cauchy stress), body_vol[p] the
    vector multiplying the weight in the external force.  Accumulates into
    the grid arrays in place.
    """
    nodes, w, grad = _stencil_data(base, fx, dx, strides)
    np.add.at(grid_mass, nodes, w * mass_p[:, None])
    np.add.at(grid_mom, nodes, w[:, :, None] * (mass_p[:, None] * vel_p)[:, None, :])
    frc = -np.einsum("nab,nmb->nma", stress_vol, grad) + body_vol[:, None, :] * w[:, :, None]
    np.add.at(grid_frc, nodes, frc)


def g2p(
    base: np.ndarray,
    fx: np.ndarray,
    dx: float,
    strides: np.ndarray,
    grid_vel: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gather node velocities: returns per-particle velocity and velocity gradient.

    vel[p] = sum_i w_i v_i, grad_v[p][a, b] = sum_i v_i[a] dN_i/dx_b.
    """
    nodes, w, grad = _stencil_data(base, fx, dx, strides)
    v_nodes = grid_vel[nodes]  # (N, M, d)
    vel = np.einsum("nm,nma->na", w, v_nodes)
    grad_v = np.einsum("nma,nmb->nab", v_nodes, grad)
    return vel, grad_v


def interpolate(
    base: np.ndarray,
    fx: np.ndarray,
    strides: np.ndarray,
    grid_field: np.ndarray,
) -> np.ndarray:
    """Weighted gather of a node field (no gradients)."""
    N, d = base.shape
    w1, _ = bspline_weights_1d(fx)
    w1 = np.moveaxis(w1, 0, 1)
    offs = _stencil_offsets(d)
    dims = np.arange(d)
    w = np.prod(w1[:, offs, dims], axis=2)
    nodes = (base[:, None, :] + offs[None, :, :]) @ strides
    vals = grid_field[nodes]
    return np.einsum("nm,nm...->n...", w, vals)


# ---------------------------------------------------------------------------
# Packed multilayer perceptron kernels.
#
# A packed net is (dims, acts, w_flat, b_flat): dims = [n_0 .. n_L],
# acts[l] in {0: identity, 1: ELU(alpha=1)}, w_flat the concatenated
# row-major (n_l, n_{l-1}) weight matrices, b_flat the concatenated biases.
# ---------------------------------------------------------------------------


def _unpack(dims: np.ndarray, w_flat: np.ndarray, b_flat: np.ndarray):
    Ws, bs = [], []
    wo = bo = 0
    for l in range(1, dims.shape[0]):
        n_out, n_in = int(dims[l]), int(dims[l - 1])
        Ws.append(w_flat[wo : wo + n_out * n_in].reshape(n_out, n_in))
        bs.append(b_flat[bo : bo + n_out])
        wo += n_out * n_in
        bo += n_out
    return Ws, bs


def _act(a: np.ndarray, code: int) -> np.ndarray:
    if code == 0:
        return a
    out = a.copy()
    neg = a < 0.0
    out[neg] = np.expm1(a[neg])
    return out


def _act_deriv(a: np.ndarray, code: int) -> np.ndarray:
    if code == 0:
        return np.ones_like(a)
    out = np.ones_like(a)
    neg = a < 0.0
    out[neg] = np.exp(a[neg])
    return out


def mlp_forward(dims, acts, w_flat, b_flat, U: np.ndarray) -> np.ndarray:
    """Forward pass of a packed net on a (N, n_0) batch."""
    Ws, bs = _unpack(dims, w_flat, b_flat)
    z = U
    for l, (W, b) in enumerate(zip(Ws, bs)):
        z = _act(z @ W.T + b, int(acts[l]))
    return z


def mlp_jacobian_cols(dims, acts, w_flat, b_flat, U: np.ndarray, c0: int, c1: int):
    """Forward pass plus Jacobian w.r.t. input columns [c0, c1).

    Returns (y, J) with y (N, n_L) and J (N, n_L, c1-c0).
    """
    Ws, bs = _unpack(dims, w_flat, b_flat)
    N = U.shape[0]
    nc = c1 - c0
    z = U
    G = None  # (N, n_l, nc)
    for l, (W, b) in enumerate(zip(Ws, bs)):
        a = z @ W.T + b
        if G is None:
            A = np.broadcast_to(W[:, c0:c1], (N, W.shape[0], nc))
        else:
            # A[n] = W @ G[n]; one flat GEMM via reshaping
            A = (W @ G.reshape(N, -1, nc).transpose(1, 0, 2).reshape(G.shape[1], N * nc)).reshape(
                W.shape[0], N, nc
            ).transpose(1, 0, 2)
        code = int(acts[l])
        D = _act_deriv(a, code)
        z = _act(a, code)
        G = D[:, :, None] * A
    return z, G


def mlp_tangent(dims, acts, w_flat, b_flat, U: np.ndarray, T: np.ndarray):
    """Forward pass plus the directional derivative along input tangents T.

    T is (N, n_0); returns (y, tau) with tau (N, n_L) the Jacobian-vector
    product dy/dU . T per row.
    """
    Ws, bs = _unpack(dims, w_flat, b_flat)
    z = U
    t = T
    for l, (W, b) in enumerate(zip(Ws, bs)):
        a = z @ W.T + b
        s = t @ W.T
        code = int(acts[l])
        z = _act(a, code)
        t = _act_deriv(a, code) * s
    return z, t
