"""Continuous deformation map: network plus consistency corrections.

The raw network maps a scaled reference coordinate and a latent vector to a
spatial position.  The full map adds two correction fields so the initial
condition is reproduced exactly at every reference point:

    map(X, xh, t) = net(X, xh) + a(X) + b(X) f(t)
    a(X) = X - net(X, xh0)
    b(X) = Vbar(X) - d net/d xh (X, xh0) vh0

with xh0, vh0 the latent anchor state, Vbar the prescribed initial
velocity field (zero in most scenes), and f a scalar warp with f(0) = 0,
f'(0) = 1 (default f(t) = t).  At t = 0, xh = xh0 the map returns X with
deformation gradient net'(xh) + I - net'(xh0) = I and velocity
J vh0 + b = Vbar(X).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import kernels
from ..errors import ConfigError, ShapeError
from .mlp import DenseLayer, pack_layers, tangent_spatial_jacobian


@dataclass
class ScalingSpec:
    """Input min-max normalization and output standardization constants."""

    x_min: np.ndarray  # (d,)
    x_max: np.ndarray  # (d,)
    out_mean: np.ndarray  # (d,)
    out_std: np.ndarray  # (d,)

    def __post_init__(self) -> None:
        self.x_min = np.asarray(self.x_min, dtype=np.float64)
        self.x_max = np.asarray(self.x_max, dtype=np.float64)
        self.out_mean = np.asarray(self.out_mean, dtype=np.float64)
        self.out_std = np.asarray(self.out_std, dtype=np.float64)
        if np.any(self.x_max <= self.x_min):
            raise ConfigError("x_max must exceed x_min componentwise")
        if np.any(self.out_std <= 0.0):
            raise ConfigError("out_std must be positive")

    @classmethod
    def identity(cls, d: int) -> "ScalingSpec":
        return cls(np.zeros(d), np.ones(d), np.zeros(d), np.ones(d))

    @property
    def x_scale(self) -> np.ndarray:
        return 1.0 / (self.x_max - self.x_min)

    def scale_in(self, X: np.ndarray) -> np.ndarray:
        return (X - self.x_min) * self.x_scale

    def scale_out(self, y: np.ndarray) -> np.ndarray:
        return y * self.out_std + self.out_mean


@dataclass
class DecoderNetwork:
    """Dense network from (scaled reference coordinate, latent) to position."""

    layers: list[DenseLayer]
    dim: int
    latent_dim: int
    scaling: ScalingSpec

    def __post_init__(self) -> None:
        if self.layers[0].n_in != self.dim + self.latent_dim:
            raise ShapeError(
                f"first layer expects {self.layers[0].n_in} inputs, "
                f"need d + r = {self.dim + self.latent_dim}"
            )
        if self.layers[-1].n_out != self.dim:
            raise ShapeError(f"last layer emits {self.layers[-1].n_out}, need d = {self.dim}")
        for a, b in zip(self.layers[:-1], self.layers[1:]):
            if a.n_out != b.n_in:
                raise ShapeError(f"layer width mismatch: {a.n_out} -> {b.n_in}")

    def packed(self):
        return pack_layers(self.layers)

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for l in self.layers:
            out.extend((l.weight, l.bias))
        return out

    def inputs(self, X: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        U = np.empty((X.shape[0], self.dim + self.latent_dim))
        U[:, : self.dim] = self.scaling.scale_in(X)
        U[:, self.dim :] = x_hat
        return U

    def raw_map(self, X: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
        """Network positions without corrections, batched over X."""
        U = self.inputs(X, x_hat)
        return self.scaling.scale_out(kernels.mlp_forward(*self.packed(), U))

    def raw_spatial_jacobian(self, X: np.ndarray, x_hat: np.ndarray):
        """(positions, d pos / d X) of the uncorrected network."""
        U = self.inputs(X, x_hat)
        y, G = kernels.mlp_jacobian_cols(*self.packed(), U, 0, self.dim)
        J = self.scaling.out_std[None, :, None] * G * self.scaling.x_scale[None, None, :]
        return self.scaling.scale_out(y), J

    def raw_latent_jacobian(self, X: np.ndarray, x_hat: np.ndarray):
        """(positions, d pos / d latent) of the uncorrected network."""
        U = self.inputs(X, x_hat)
        d = self.dim
        y, G = kernels.mlp_jacobian_cols(*self.packed(), U, d, d + self.latent_dim)
        return self.scaling.scale_out(y), self.scaling.out_std[None, :, None] * G

    def raw_latent_tangent(self, X: np.ndarray, x_hat: np.ndarray, w_hat: np.ndarray):
        """(positions, d pos / d latent . w_hat) without building the Jacobian."""
        U = self.inputs(X, x_hat)
        T = np.zeros_like(U)
        T[:, self.dim :] = w_hat
        y, tau = kernels.mlp_tangent(*self.packed(), U, T)
        return self.scaling.scale_out(y), tau * self.scaling.out_std


def default_decoder(d: int, r: int, rng: np.random.Generator, scaling: ScalingSpec | None = None, width: int = 30, hidden: int = 4) -> DecoderNetwork:
    """Standard architecture: (d+r) -> width x hidden -> d, ELU inside."""
    from .mlp import xavier_layers

    sizes = [d + r] + [width] * hidden + [d]
    acts = ["elu"] * hidden + ["identity"]
    return DecoderNetwork(
        layers=xavier_layers(sizes, acts, rng),
        dim=d,
        latent_dim=r,
        scaling=scaling if scaling is not None else ScalingSpec.identity(d),
    )


VbarField = Callable[[np.ndarray], np.ndarray]


@dataclass
class CorrectionFields:
    """Anchor state and initial-velocity data entering the corrections."""

    x_hat0: np.ndarray  # (r,)
    v_hat0: np.ndarray  # (r,)
    vbar: VbarField | None = None  # prescribed initial velocity field
    vbar_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    time_warp: Callable[[float], float] | None = None  # f(t), default t
    time_warp_rate: Callable[[float], float] | None = None  # f'(t), default 1

    def __post_init__(self) -> None:
        self.x_hat0 = np.asarray(self.x_hat0, dtype=np.float64)
        self.v_hat0 = np.asarray(self.v_hat0, dtype=np.float64)

    def f(self, t: float) -> float:
        return float(self.time_warp(t)) if self.time_warp is not None else float(t)

    def f_rate(self, t: float) -> float:
        return float(self.time_warp_rate(t)) if self.time_warp_rate is not None else 1.0

    @property
    def b_is_zero(self) -> bool:
        return self.vbar is None and not np.any(self.v_hat0)

    def b_field(self, dec: DecoderNetwork, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.b_is_zero:
            return np.zeros_like(X, dtype=np.float64)
        _, tau = dec.raw_latent_tangent(X, self.x_hat0, self.v_hat0)
        b = -tau
        if self.vbar is not None:
            b = b + np.asarray(self.vbar(X), dtype=np.float64)
        return b

    def b_spatial_jacobian(self, dec: DecoderNetwork, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        d = dec.dim
        if self.b_is_zero:
            return np.zeros((X.shape[0], d, d))
        U = dec.inputs(X, self.x_hat0)
        T = np.zeros_like(U)
        T[:, d:] = self.v_hat0
        _, TT = tangent_spatial_jacobian(dec.layers, U, T, (0, d))
        out = -dec.scaling.out_std[None, :, None] * TT * dec.scaling.x_scale[None, None, :]
        if self.vbar is not None:
            if self.vbar_jacobian is None:
                raise ConfigError("vbar_jacobian required when vbar is set")
            out = out + np.asarray(self.vbar_jacobian(X), dtype=np.float64)
        return out


def decode(dec: DecoderNetwork, corr: CorrectionFields, X: np.ndarray, x_hat: np.ndarray, t: float) -> np.ndarray:
    """Deformed positions of reference points X at latent state x_hat, time t."""
    X2 = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = dec.raw_map(X2, x_hat) + X2 - dec.raw_map(X2, corr.x_hat0)
    if not corr.b_is_zero:
        out = out + corr.b_field(dec, X2) * corr.f(t)
    return out if np.asarray(X).ndim == 2 else out[0]


def deformation_gradient(dec: DecoderNetwork, corr: CorrectionFields, X: np.ndarray, x_hat: np.ndarray, t: float) -> np.ndarray:
    """d map / d X, batched: (N, d, d) (or (d, d) for a single point)."""
    X2 = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _, J = dec.raw_spatial_jacobian(X2, x_hat)
    _, J0 = dec.raw_spatial_jacobian(X2, corr.x_hat0)
    F = J - J0 + np.eye(dec.dim)
    if not corr.b_is_zero:
        F = F + corr.b_spatial_jacobian(dec, X2) * corr.f(t)
    return F if np.asarray(X).ndim == 2 else F[0]


def decode_with_gradient(dec: DecoderNetwork, corr: CorrectionFields, X: np.ndarray, x_hat: np.ndarray, t: float):
    """(positions, deformation gradients) sharing the network passes."""
    X2 = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y, J = dec.raw_spatial_jacobian(X2, x_hat)
    y0, J0 = dec.raw_spatial_jacobian(X2, corr.x_hat0)
    pos = y + X2 - y0
    F = J - J0 + np.eye(dec.dim)
    if not corr.b_is_zero:
        ft = corr.f(t)
        pos = pos + corr.b_field(dec, X2) * ft
        F = F + corr.b_spatial_jacobian(dec, X2) * ft
    return pos, F


def latent_jacobian(dec: DecoderNetwork, X: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    """d map / d latent; the corrections do not depend on the latent state."""
    X2 = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _, J = dec.raw_latent_jacobian(X2, x_hat)
    return J if np.asarray(X).ndim == 2 else J[0]


def manifold_velocity(
    dec: DecoderNetwork,
    corr: CorrectionFields,
    X: np.ndarray,
    x_hat: np.ndarray,
    v_hat: np.ndarray,
    t: float,
) -> np.ndarray:
    """Material velocity of the map: (d map / d latent) v_hat + b(X) f'(t)."""
    X2 = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _, tau = dec.raw_latent_tangent(X2, x_hat, v_hat)
    v = tau
    if not corr.b_is_zero:
        v = v + corr.b_field(dec, X2) * corr.f_rate(t)
    return v if np.asarray(X).ndim == 2 else v[0]
