"""Dense layers with forward-mode Jacobian propagation and exact backprop.

The map is z_0 = u, a_l = z_{l-1} W_l^T + b_l, z_l = act_l(a_l).  Besides
the plain forward pass the engine propagates, in forward mode,

  * the Jacobian w.r.t. a contiguous block of input columns
    (G_l = act' * (W_l G_{l-1})), and
  * a directional derivative along one input tangent per row
    (t_l = act' * (W_l t_{l-1})),

and can backpropagate a loss through all three quantities at once, which
requires the second derivative of the activation.  Activations: "elu"
(alpha = 1, derivative 1 at 0 from the right) and "identity".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError

ACT_CODES = {"identity": 0, "elu": 1}


@dataclass
class DenseLayer:
    weight: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)
    activation: str = "elu"

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACT_CODES:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"layer weight {self.weight.shape} and bias {self.bias.shape} are inconsistent"
            )

    @property
    def n_in(self) -> int:
        return int(self.weight.shape[1])

    @property
    def n_out(self) -> int:
        return int(self.weight.shape[0])


def xavier_layers(sizes: list[int], activations: list[str], rng: np.random.Generator) -> list[DenseLayer]:
    """Glorot-uniform initialized stack; biases start at zero."""
    if len(activations) != len(sizes) - 1:
        raise ConfigError("need one activation per layer")
    layers = []
    for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
        bound = np.sqrt(6.0 / (n_in + n_out))
        W = rng.uniform(-bound, bound, size=(n_out, n_in))
        layers.append(DenseLayer(W, np.zeros(n_out), act))
    return layers


def pack_layers(layers: list[DenseLayer]):
    """Flat representation consumed by the kernel backends."""
    dims = np.array([layers[0].n_in] + [l.n_out for l in layers], dtype=np.int64)
    acts = np.array([ACT_CODES[l.activation] for l in layers], dtype=np.int64)
    w_flat = np.concatenate([np.ascontiguousarray(l.weight).ravel() for l in layers])
    b_flat = np.concatenate([l.bias for l in layers])
    return dims, acts, w_flat, b_flat


def _elu(a: np.ndarray) -> np.ndarray:
    out = a.copy()
    neg = a < 0.0
    out[neg] = np.expm1(a[neg])
    return out


def _elu_d1(a: np.ndarray) -> np.ndarray:
    out = np.ones_like(a)
    neg = a < 0.0
    out[neg] = np.exp(a[neg])
    return out


def _elu_d2(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    neg = a < 0.0
    out[neg] = np.exp(a[neg])
    return out


def _apply_act(a: np.ndarray, act: str):
    """Returns (value, first derivative, second derivative)."""
    if act == "identity":
        return a, np.ones_like(a), np.zeros_like(a)
    return _elu(a), _elu_d1(a), _elu_d2(a)


def _batched_right_mult(W: np.ndarray, G: np.ndarray) -> np.ndarray:
    """A[n] = W @ G[n] for G (N, n_in, nc) via one flat GEMM."""
    N, n_in, nc = G.shape
    flat = G.transpose(1, 0, 2).reshape(n_in, N * nc)
    return (W @ flat).reshape(W.shape[0], N, nc).transpose(1, 0, 2)


def _batched_left_mult(W: np.ndarray, A: np.ndarray) -> np.ndarray:
    """G[n] = W^T @ A[n] for A (N, n_out, nc)."""
    N, n_out, nc = A.shape
    flat = A.transpose(1, 0, 2).reshape(n_out, N * nc)
    return (W.T @ flat).reshape(W.shape[1], N, nc).transpose(1, 0, 2)


def forward(layers: list[DenseLayer], U: np.ndarray) -> np.ndarray:
    z = np.asarray(U, dtype=np.float64)
    for layer in layers:
        a = z @ layer.weight.T + layer.bias
        z = _apply_act(a, layer.activation)[0]
    return z


def tangent_spatial_jacobian(
    layers: list[DenseLayer],
    U: np.ndarray,
    tangent: np.ndarray,
    jac_cols: tuple[int, int],
):
    """Derivative of the directional derivative w.r.t. input columns.

    Propagates T_l = d(t_l)/d(u[c0:c1]) alongside the tangent:
    T_l = act'' * A_l * s_l + act' * (W T_{l-1}).  Returns (tau, T) with
    tau (N, n_L) and T (N, n_L, c1-c0).
    """
    U = np.asarray(U, dtype=np.float64)
    N = U.shape[0]
    c0, c1 = jac_cols
    nc = c1 - c0
    G = np.zeros((N, U.shape[1], nc))
    G[:, c0:c1, :] = np.eye(nc)
    t = np.asarray(tangent, dtype=np.float64)
    T = np.zeros((N, U.shape[1], nc))
    z = U
    for layer in layers:
        a = z @ layer.weight.T + layer.bias
        val, d1, d2 = _apply_act(a, layer.activation)
        A = _batched_right_mult(layer.weight, G)
        s = t @ layer.weight.T
        Q = _batched_right_mult(layer.weight, T)
        T = (d2 * s)[:, :, None] * A + d1[:, :, None] * Q
        G = d1[:, :, None] * A
        t = d1 * s
        z = val
    return t, T


@dataclass
class Tape:
    """Intermediate state of one forward pass, consumed by backward_tape."""

    zs: list  # z_0 .. z_L
    d1: list  # act'(a_l), l = 1..L
    d2: list  # act''(a_l)
    As: list | None  # pre-activation Jacobians (N, n_l, nc)
    Gs: list | None  # G_0 .. G_L
    ss: list | None  # pre-activation tangents
    ts: list | None  # t_0 .. t_L
    jac_cols: tuple | None = None


def forward_tape(
    layers: list[DenseLayer],
    U: np.ndarray,
    jac_cols: tuple[int, int] | None = None,
    tangent: np.ndarray | None = None,
):
    """Forward pass recording everything backward_tape needs.

    Returns (y, G, tau, tape); G is the Jacobian w.r.t. input columns
    [c0, c1) with shape (N, n_L, c1-c0) when jac_cols is given, tau the
    directional derivative (N, n_L) when tangent (N, n_0) is given.
    """
    U = np.asarray(U, dtype=np.float64)
    N = U.shape[0]
    z = U
    zs = [U]
    d1s, d2s = [], []
    As, Gs = (None, None)
    ss, ts = (None, None)
    G = None
    t = None
    if jac_cols is not None:
        As, Gs = [], []
        c0, c1 = jac_cols
        G = np.zeros((N, U.shape[1], c1 - c0))
        G[:, c0:c1, :] = np.eye(c1 - c0)
        Gs.append(G)
    if tangent is not None:
        ss, ts = [], []
        t = np.asarray(tangent, dtype=np.float64)
        if t.shape != U.shape:
            raise ShapeError(f"tangent shape {t.shape} != input shape {U.shape}")
        ts.append(t)

    for layer in layers:
        a = z @ layer.weight.T + layer.bias
        val, d1, d2 = _apply_act(a, layer.activation)
        if G is not None:
            A = _batched_right_mult(layer.weight, G)
            G = d1[:, :, None] * A
            As.append(A)
            Gs.append(G)
        if t is not None:
            s = t @ layer.weight.T
            t = d1 * s
            ss.append(s)
            ts.append(t)
        z = val
        zs.append(z)
        d1s.append(d1)
        d2s.append(d2)
    tape = Tape(zs, d1s, d2s, As, Gs, ss, ts, jac_cols)
    return z, G, t, tape


def backward_tape(
    layers: list[DenseLayer],
    tape: Tape,
    grad_y: np.ndarray | None = None,
    grad_G: np.ndarray | None = None,
    grad_tau: np.ndarray | None = None,
):
    """Exact gradients of sum(loss) given partials w.r.t. y, G, and tau.

    Returns (param_grads, grad_U, grad_T): param_grads is a list of
    (dW, db) per layer, grad_U the gradient w.r.t. the input batch, and
    grad_T the gradient w.r.t. the tangent input (None when no tangent was
    propagated).
    """
    L = len(layers)
    N = tape.zs[0].shape[0]
    zbar = grad_y if grad_y is not None else np.zeros_like(tape.zs[-1])
    Gbar = None
    if grad_G is not None:
        if tape.Gs is None:
            raise ConfigError("grad_G given but no Jacobian was propagated")
        Gbar = grad_G
    tbar = None
    if grad_tau is not None:
        if tape.ts is None:
            raise ConfigError("grad_tau given but no tangent was propagated")
        tbar = grad_tau

    param_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * L
    for l in range(L - 1, -1, -1):
        W = layers[l].weight
        d1, d2 = tape.d1[l], tape.d2[l]
        # gather every contribution to the pre-activation gradient first:
        # z = act(a), G = act'(a) * A, t = act'(a) * s all depend on a
        abar = zbar * d1
        Abar = sbar = None
        if Gbar is not None:
            A = tape.As[l]
            abar = abar + (Gbar * A).sum(axis=2) * d2
            Abar = Gbar * d1[:, :, None]
        if tbar is not None:
            s = tape.ss[l]
            abar = abar + tbar * s * d2
            sbar = tbar * d1
        # a = z_prev W^T + b, A = W G_prev, s = t_prev W^T
        dW = abar.T @ tape.zs[l]
        if Abar is not None:
            # sum_n,j Abar[n,k,j] G_prev[n,i,j] as one flat GEMM
            G_prev = tape.Gs[l]
            k, i = Abar.shape[1], G_prev.shape[1]
            dW = dW + Abar.transpose(1, 0, 2).reshape(k, -1) @ G_prev.transpose(0, 2, 1).reshape(-1, i)
            Gbar = _batched_left_mult(W, Abar)
        if sbar is not None:
            dW = dW + sbar.T @ tape.ts[l]
            tbar = sbar @ W
        param_grads[l] = (dW, abar.sum(axis=0))
        zbar = abar @ W
    return param_grads, zbar, tbar
