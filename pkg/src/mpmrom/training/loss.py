"""Penalized reconstruction loss with exact parameter gradients.

For every snapshot n of an instance the encoder produces a latent state
from the snapshot's positions; the raw decoder network is then penalized
on position, deformation gradient, and (paired with the next snapshot's
latent through a forward difference) material velocity:

    sum_n sum_p  |net(X_p, xh_n) - x_p|^2
               + lambda_f |d net/d X - F_p|^2
               + lambda_v |d net/d xh . (xh_{n+1} - xh_n)/dt - v_p|^2

The last snapshot of a trajectory has no successor and contributes no
velocity term.  Gradients flow through both networks, including the
coupling of consecutive latents inside the finite difference.
"""

from __future__ import annotations

import numpy as np

from ..manifold.decoder import DecoderNetwork
from ..manifold.encoder import EncoderNetwork, encoder_backward, encoder_forward, flatten_snapshots
from ..manifold.mlp import backward_tape, forward_tape


def loss_and_gradients(
    dec: DecoderNetwork,
    enc: EncoderNetwork,
    ref_positions: np.ndarray,
    positions: np.ndarray,
    velocities: np.ndarray,
    def_grads: np.ndarray,
    dt: float,
    lambda_f: float,
    lambda_v: float,
):
    """Returns (loss, parts, decoder grads, encoder grads) for one instance.

    parts is a dict with the raw (unweighted by count) position, gradient,
    and velocity contributions.  Gradient lists follow each network's
    parameters() ordering.
    """
    S, P, d = positions.shape
    r = dec.latent_dim
    use_f = lambda_f > 0.0
    use_v = lambda_v > 0.0 and S > 1

    flat = flatten_snapshots(dec, positions)
    latents, enc_tape = encoder_forward(enc, flat, need_tape=True)

    # one decoder pass over all (snapshot, particle) pairs
    Xs = dec.scaling.scale_in(np.asarray(ref_positions, dtype=np.float64))
    U = np.empty((S * P, d + r))
    U[:, :d] = np.tile(Xs, (S, 1))
    U[:, d:] = np.repeat(latents, P, axis=0)
    T = None
    if use_v:
        w = np.zeros((S, r))
        w[:-1] = (latents[1:] - latents[:-1]) / dt
        T = np.zeros_like(U)
        T[:, d:] = np.repeat(w, P, axis=0)
    y, G, tau, tape = forward_tape(dec.layers, U, jac_cols=(0, d) if use_f else None, tangent=T)

    std = dec.scaling.out_std
    xsc = dec.scaling.x_scale
    r_pos = (y * std + dec.scaling.out_mean) - positions.reshape(S * P, d)
    loss_pos = float(np.sum(r_pos**2))
    grad_y = 2.0 * r_pos * std

    grad_G = None
    loss_f = 0.0
    if use_f:
        F_pred = G * std[None, :, None] * xsc[None, None, :]
        r_f = F_pred - def_grads.reshape(S * P, d, d)
        loss_f = float(np.sum(r_f**2))
        grad_G = 2.0 * lambda_f * r_f * std[None, :, None] * xsc[None, None, :]

    grad_tau = None
    loss_v = 0.0
    if use_v:
        v_pred = tau * std
        r_v = v_pred - velocities.reshape(S * P, d)
        r_v[(S - 1) * P :] = 0.0  # no successor snapshot
        loss_v = float(np.sum(r_v**2))
        grad_tau = 2.0 * lambda_v * r_v * std

    dec_pairs, grad_U, grad_T = backward_tape(dec.layers, tape, grad_y=grad_y, grad_G=grad_G, grad_tau=grad_tau)

    lat_grad = grad_U[:, d:].reshape(S, P, r).sum(axis=1)
    if use_v:
        gT = grad_T[:, d:].reshape(S, P, r).sum(axis=1) / dt
        lat_grad[1:] += gT[:-1]
        lat_grad[:-1] -= gT[:-1]
    enc_grads, _ = encoder_backward(enc, enc_tape, lat_grad)

    dec_grads: list[np.ndarray] = []
    for dW, db in dec_pairs:
        dec_grads.extend((dW, db))

    loss = loss_pos + lambda_f * loss_f + lambda_v * loss_v
    parts = {"position": loss_pos, "def_grad": loss_f, "velocity": loss_v}
    return loss, parts, dec_grads, enc_grads
