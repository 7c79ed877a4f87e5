"""Newton inversion of the deformation map.

Given a spatial target x and the current latent state, find the reference
point X with map(X) = x.  The map's spatial Jacobian is the deformation
gradient, so each Newton step solves F dX = x - map(X).
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateMapError, NonConvergenceError
from .decoder import CorrectionFields, DecoderNetwork, decode_with_gradient

INVERT_TOL = 1e-11
INVERT_MAX_ITER = 30
_DET_FLOOR = 1e-12

# per-point inversion outcomes
CONVERGED = 0
STALLED = 1
DEGENERATE = 2
LEFT_DOMAIN = 3


def invert_map_batch(
    dec: DecoderNetwork,
    corr: CorrectionFields,
    targets: np.ndarray,
    x_hat: np.ndarray,
    t: float,
    guess: np.ndarray | None = None,
    ref_lo: np.ndarray | None = None,
    ref_hi: np.ndarray | None = None,
    tol: float = INVERT_TOL,
    max_iter: int = INVERT_MAX_ITER,
):
    """Invert the map at many targets at once.

    Returns (X, ok, status).  status holds one code per point: CONVERGED,
    STALLED (iteration budget exhausted), DEGENERATE (singular Jacobian),
    or LEFT_DOMAIN (iterate escaped the reference box, when one is given —
    such points are abandoned early since the map is only meaningful on the
    reference domain).  ok is simply status == CONVERGED.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    n, d = targets.shape
    X = np.array(guess, dtype=np.float64, copy=True) if guess is not None else targets.copy()
    if X.shape != targets.shape:
        raise ValueError(f"guess shape {X.shape} != targets shape {targets.shape}")
    status = np.full(n, STALLED, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    margin = None
    if ref_lo is not None and ref_hi is not None:
        # allow a little overshoot before declaring an iterate lost
        margin = 0.25 * (np.asarray(ref_hi) - np.asarray(ref_lo))

    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        pos, F = decode_with_gradient(dec, corr, X[idx], x_hat, t)
        r = targets[idx] - pos
        done = np.linalg.norm(r, axis=1) <= tol
        if np.any(done):
            status[idx[done]] = CONVERGED
            active[idx[done]] = False
            keep = ~done
            idx, r, F = idx[keep], r[keep], F[keep]
            if idx.size == 0:
                break
        det = np.linalg.det(F)
        bad = np.abs(det) <= _DET_FLOOR
        if np.any(bad):
            status[idx[bad]] = DEGENERATE
            active[idx[bad]] = False
            good = ~bad
            idx, r, F = idx[good], r[good], F[good]
            if idx.size == 0:
                continue
        X[idx] += np.linalg.solve(F, r[..., None])[..., 0]
        if margin is not None:
            lost = np.any((X[idx] < ref_lo - margin) | (X[idx] > ref_hi + margin), axis=1)
            if np.any(lost):
                status[idx[lost]] = LEFT_DOMAIN
                active[idx[lost]] = False

    if margin is not None:
        # converged points outside the reference box are useless to callers
        outside = np.any((X < ref_lo - margin) | (X > ref_hi + margin), axis=1)
        status[outside & (status == CONVERGED)] = LEFT_DOMAIN
    return X, status == CONVERGED, status


def invert_map(
    dec: DecoderNetwork,
    corr: CorrectionFields,
    target: np.ndarray,
    x_hat: np.ndarray,
    t: float,
    guess: np.ndarray | None = None,
    tol: float = INVERT_TOL,
    max_iter: int = INVERT_MAX_ITER,
) -> np.ndarray:
    """Single-point inversion; raises instead of returning a failure mask."""
    target = np.asarray(target, dtype=np.float64)
    g = guess[None] if guess is not None else None
    X, ok, status = invert_map_batch(dec, corr, target[None], x_hat, t, guess=g, tol=tol, max_iter=max_iter)
    if not ok[0]:
        if status[0] == DEGENERATE:
            raise DegenerateMapError(f"map Jacobian is singular near X = {X[0]}")
        pos, _ = decode_with_gradient(dec, corr, X, x_hat, t)
        raise NonConvergenceError(
            f"map inversion stalled at residual {np.linalg.norm(target - pos[0]):.3e} after {max_iter} iterations"
        )
    return X[0]
