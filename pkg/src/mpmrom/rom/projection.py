"""Projection of full-space trial states back onto the latent manifold."""

from __future__ import annotations

import warnings

import numpy as np

from ..manifold.anchor import GaussNewtonResult, gauss_newton
from ..manifold.decoder import CorrectionFields, DecoderNetwork, decode, latent_jacobian
from .types import GaussNewtonConfig


def project_velocity(
    dec: DecoderNetwork,
    sample_ref: np.ndarray,
    x_hat: np.ndarray,
    v_target: np.ndarray,
) -> np.ndarray:
    """Least-squares latent velocity reproducing v_target at the samples.

    Solves min over vh of ||J(x_hat) vh - v_target|| with J the latent
    Jacobian stacked over the sample points.
    """
    J = latent_jacobian(dec, sample_ref, x_hat).reshape(-1, dec.latent_dim)
    v_hat, _, rank, _ = np.linalg.lstsq(J, v_target.ravel(), rcond=None)
    if rank < dec.latent_dim:
        warnings.warn(
            f"latent Jacobian at the samples has rank {rank} < {dec.latent_dim}; velocity projection is not unique",
            stacklevel=2,
        )
    return v_hat


def project_velocity_only(
    dec: DecoderNetwork,
    sample_ref: np.ndarray,
    x_hat: np.ndarray,
    v_trial: np.ndarray,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Latent update that integrates the projected velocity directly."""
    v_hat = project_velocity(dec, sample_ref, x_hat, v_trial)
    return x_hat + dt * v_hat, v_hat


def project_position_velocity(
    dec: DecoderNetwork,
    corr: CorrectionFields,
    sample_ref: np.ndarray,
    x_trial: np.ndarray,
    v_trial: np.ndarray,
    x_hat: np.ndarray,
    x_hat_prev: np.ndarray,
    t_next: float,
    gn: GaussNewtonConfig | None = None,
) -> tuple[np.ndarray, np.ndarray, GaussNewtonResult]:
    """Nonlinear position projection plus the velocity least squares.

    The next latent state minimizes the distance between the decoded
    sample positions at t_next and the trial positions; the linear
    extrapolation 2 x_hat - x_hat_prev seeds the Gauss-Newton iteration.
    Returns (x_hat_next, v_hat_next, solve result); a non-converged
    result carries the best iterate found.
    """
    cfg = gn or GaussNewtonConfig()
    v_hat = project_velocity(dec, sample_ref, x_hat, v_trial)

    def residual_jac(xh: np.ndarray, need_jac: bool):
        r = (decode(dec, corr, sample_ref, xh, t_next) - x_trial).ravel()
        if not need_jac:
            return r, None
        J = latent_jacobian(dec, sample_ref, xh).reshape(-1, dec.latent_dim)
        return r, J

    guess = 2.0 * x_hat - x_hat_prev
    res = gauss_newton(
        residual_jac,
        guess,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
        shrink=cfg.shrink,
        armijo=cfg.armijo,
    )
    return res.x, v_hat, res
