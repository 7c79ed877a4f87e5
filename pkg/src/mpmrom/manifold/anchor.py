"""Anchor-state fitting: latent initial conditions and the shared
Gauss-Newton solver used for nonlinear least-squares throughout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .decoder import CorrectionFields, DecoderNetwork

GN_STEP_TOL = 1e-8
GN_MAX_ITER = 20
GN_SHRINK = 0.5
GN_ARMIJO = 1e-4
GN_MAX_BACKTRACKS = 30


@dataclass
class GaussNewtonResult:
    x: np.ndarray
    converged: bool
    iterations: int
    cost: float


def gauss_newton(
    residual_jac: Callable[[np.ndarray, bool], tuple[np.ndarray, np.ndarray | None]],
    x0: np.ndarray,
    tol: float = GN_STEP_TOL,
    max_iter: int = GN_MAX_ITER,
    shrink: float = GN_SHRINK,
    armijo: float = GN_ARMIJO,
) -> GaussNewtonResult:
    """Minimize 0.5 ||r(x)||^2 with damped Gauss-Newton.

    residual_jac(x, need_jac) returns (r, J) with J omitted (None) when
    need_jac is False.  Iteration stops when the proposed step norm drops
    below tol; each step is backtracked until the Armijo condition on the
    squared residual holds.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    r, J = residual_jac(x, True)
    cost = 0.5 * float(r @ r)
    for it in range(1, max_iter + 1):
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        if np.linalg.norm(step) <= tol:
            return GaussNewtonResult(x, True, it - 1, cost)
        slope = float((J.T @ r) @ step)  # descent direction: slope < 0
        alpha = 1.0
        accepted = False
        for _ in range(GN_MAX_BACKTRACKS):
            cand = x + alpha * step
            r_new, _ = residual_jac(cand, False)
            c_new = 0.5 * float(r_new @ r_new)
            if c_new <= cost + armijo * alpha * slope:
                x, cost = cand, c_new
                accepted = True
                break
            alpha *= shrink
        if not accepted:
            return GaussNewtonResult(x, False, it, cost)
        r, J = residual_jac(x, True)
        cost = 0.5 * float(r @ r)
    return GaussNewtonResult(x, False, max_iter, cost)


def fit_anchor_latent(
    dec: DecoderNetwork,
    ref_points: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = GN_STEP_TOL,
    max_iter: int = GN_MAX_ITER,
) -> GaussNewtonResult:
    """Latent state whose raw network map best reproduces the rest pose.

    Solves min over xh of sum_s ||net(X_s, xh) - X_s||^2 at the given
    reference sample points.
    """
    X = np.atleast_2d(np.asarray(ref_points, dtype=np.float64))

    def residual_jac(xh: np.ndarray, need_jac: bool):
        if need_jac:
            y, J = dec.raw_latent_jacobian(X, xh)
            return (y - X).ravel(), J.reshape(-1, dec.latent_dim)
        return (dec.raw_map(X, xh) - X).ravel(), None

    guess = x0 if x0 is not None else np.zeros(dec.latent_dim)
    return gauss_newton(residual_jac, guess, tol=tol, max_iter=max_iter)


def initial_latent_fit(
    dec: DecoderNetwork,
    ref_points: np.ndarray,
    vbar: Callable[[np.ndarray], np.ndarray] | None = None,
    vbar_jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
    x0: np.ndarray | None = None,
) -> CorrectionFields:
    """Correction fields for a trained decoder.

    The anchor latent comes from a Gauss-Newton fit of the raw map to the
    rest pose; the anchor latent velocity is the least-squares projection
    of the prescribed initial velocity field onto the latent Jacobian
    columns (zero when no field is prescribed).
    """
    X = np.atleast_2d(np.asarray(ref_points, dtype=np.float64))
    res = fit_anchor_latent(dec, X, x0=x0)
    x_hat0 = res.x
    if vbar is None:
        v_hat0 = np.zeros(dec.latent_dim)
    else:
        _, J = dec.raw_latent_jacobian(X, x_hat0)
        target = np.asarray(vbar(X), dtype=np.float64).ravel()
        v_hat0, *_ = np.linalg.lstsq(J.reshape(-1, dec.latent_dim), target, rcond=None)
    return CorrectionFields(x_hat0, v_hat0, vbar=vbar, vbar_jacobian=vbar_jacobian)
