"""Snapshot encoder: flattened particle positions to a latent vector.

Positions are normalized with the decoder's input scaling, flattened
particle-major, then pushed through a stack of single-channel 1-D
convolutions (kernel 6, stride 2, ELU) that roughly halves the signal
until another halving would drop below 32 samples, and finally through a
two-layer dense head (32 wide, ELU then identity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, ShapeError
from .decoder import DecoderNetwork
from .mlp import DenseLayer, _apply_act, backward_tape, forward_tape, xavier_layers

CONV_KERNEL = 6
CONV_STRIDE = 2
MIN_CONV_LEN = 32
HEAD_WIDTH = 32


def conv_out_len(n: int, kernel: int = CONV_KERNEL, stride: int = CONV_STRIDE) -> int:
    return (n - kernel) // stride + 1


@dataclass
class ConvLayer:
    """Single-channel strided 1-D convolution with ELU."""

    weight: np.ndarray  # (kernel,)
    bias: np.ndarray  # (1,)
    stride: int = CONV_STRIDE

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(1)
        if self.weight.ndim != 1:
            raise ShapeError("conv weight must be 1-D")

    @property
    def kernel(self) -> int:
        return self.weight.shape[0]


def _conv_windows(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    # (N, L) -> (N, L_out, kernel) strided view, no copy
    return sliding_window_view(x, kernel, axis=1)[:, ::stride, :]


@dataclass
class EncoderNetwork:
    conv_layers: list[ConvLayer]
    fc_layers: list[DenseLayer]
    in_len: int
    latent_dim: int

    def __post_init__(self) -> None:
        n = self.in_len
        for c in self.conv_layers:
            n = conv_out_len(n, c.kernel, c.stride)
            if n < 1:
                raise ConfigError("conv stack consumes the whole signal")
        if self.fc_layers[0].n_in != n:
            raise ShapeError(f"dense head expects {self.fc_layers[0].n_in} inputs, conv stack yields {n}")
        if self.fc_layers[-1].n_out != self.latent_dim:
            raise ShapeError("dense head must end at the latent dimension")

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for c in self.conv_layers:
            out.extend((c.weight, c.bias))
        for l in self.fc_layers:
            out.extend((l.weight, l.bias))
        return out


def build_encoder(in_len: int, latent_dim: int, rng: np.random.Generator) -> EncoderNetwork:
    """Architecture chosen from the flattened snapshot length."""
    convs: list[ConvLayer] = []
    n = in_len
    while conv_out_len(n) >= MIN_CONV_LEN:
        limit = np.sqrt(6.0 / (CONV_KERNEL + 1.0))
        convs.append(ConvLayer(rng.uniform(-limit, limit, CONV_KERNEL), np.zeros(1)))
        n = conv_out_len(n)
    fc = xavier_layers([n, HEAD_WIDTH, latent_dim], ["elu", "identity"], rng)
    return EncoderNetwork(convs, fc, in_len, latent_dim)


@dataclass
class EncoderTape:
    windows: list  # strided input views per conv layer
    d1: list  # ELU slopes per conv layer
    in_lens: list  # true input length per conv layer (stride leftovers!)
    fc_tape: object


def encoder_forward(enc: EncoderNetwork, flat: np.ndarray, need_tape: bool = False):
    """Latents for a batch of flattened, scaled snapshots (N, in_len)."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.ndim != 2 or flat.shape[1] != enc.in_len:
        raise ShapeError(f"expected (N, {enc.in_len}) input, got {flat.shape}")
    x = flat
    wins, slopes, in_lens = [], [], []
    for c in enc.conv_layers:
        w = _conv_windows(x, c.kernel, c.stride)
        pre = w @ c.weight + c.bias
        if need_tape:
            wins.append(w)
            in_lens.append(x.shape[1])
        x, d1, _ = _apply_act(pre, "elu")
        if need_tape:
            slopes.append(d1)
    if need_tape:
        y, _, _, fc_tape = forward_tape(enc.fc_layers, x)
        return y, EncoderTape(wins, slopes, in_lens, fc_tape)
    for l in enc.fc_layers:
        val, _, _ = _apply_act(x @ l.weight.T + l.bias, l.activation)
        x = val
    return x


def encoder_backward(enc: EncoderNetwork, tape: EncoderTape, grad_latent: np.ndarray):
    """Gradients w.r.t. parameters() order and the flat input batch."""
    fc_grads, xbar, _ = backward_tape(enc.fc_layers, tape.fc_tape, grad_y=grad_latent)
    conv_grads: list[tuple[np.ndarray, np.ndarray]] = []
    for c, w, d1, n_in in zip(
        reversed(enc.conv_layers),
        reversed(tape.windows),
        reversed(tape.d1),
        reversed(tape.in_lens),
    ):
        prebar = xbar * d1
        dw = np.einsum("nj,njk->k", prebar, w)
        db = np.array([prebar.sum()])
        # columns past the last window get zero gradient; the strided
        # forward never reads them
        xbar = np.zeros((prebar.shape[0], n_in))
        for k in range(c.kernel):
            xbar[:, k : k + c.stride * w.shape[1] : c.stride] += prebar * c.weight[k]
        conv_grads.append((dw, db))
    grads: list[np.ndarray] = []
    for dw, db in reversed(conv_grads):
        grads.extend((dw, db))
    for dw, db in fc_grads:
        grads.extend((dw, db))
    return grads, xbar


def flatten_snapshots(dec: DecoderNetwork, positions: np.ndarray) -> np.ndarray:
    """Scale positions with the decoder's input normalization and flatten."""
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim == 2:
        pos = pos[None]
    if pos.shape[2] != dec.dim:
        raise ShapeError(f"positions have dim {pos.shape[2]}, decoder expects {dec.dim}")
    return dec.scaling.scale_in(pos).reshape(pos.shape[0], -1)


def encode(enc: EncoderNetwork, dec: DecoderNetwork, positions: np.ndarray) -> np.ndarray:
    """Latent states for one snapshot (P, d) or a stack (S, P, d)."""
    pos = np.asarray(positions, dtype=np.float64)
    single = pos.ndim == 2
    flat = flatten_snapshots(dec, pos)
    out = encoder_forward(enc, flat)
    return out[0] if single else out
