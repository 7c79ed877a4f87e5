"""Hyperelastic constitutive model: fixed corotated elasticity.

Energy density  psi(F) = mu * sum_i (s_i - 1)^2 + lambda/2 * (J - 1)^2
with s_i the singular values of F and J = det F.  First Piola-Kirchhoff
stress P = 2 mu (F - R) + lambda (J - 1) J F^{-T}; Cauchy stress
sigma = P F^T / J.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvertedElementError

# det(F) at or below this is treated as an inverted element.
DET_F_MIN = 1e-12


@dataclass(frozen=True)
class ConstitutiveParams:
    """Material constants for one body.

    youngs_modulus  E  [Pa]
    poisson_ratio   nu (dimensionless, in (-1, 0.5))
    density         rho0, reference mass density [kg/m^3]
    """

    youngs_modulus: float
    poisson_ratio: float
    density: float

    def __post_init__(self) -> None:
        if self.youngs_modulus <= 0.0:
            raise ConfigError(f"Young's modulus must be positive, got {self.youngs_modulus}")
        if not (-1.0 < self.poisson_ratio < 0.5):
            raise ConfigError(f"Poisson ratio must lie in (-1, 0.5), got {self.poisson_ratio}")
        if self.density <= 0.0:
            raise ConfigError(f"density must be positive, got {self.density}")

    @property
    def lame(self) -> tuple[float, float]:
        return lame_from_youngs(self.youngs_modulus, self.poisson_ratio)


def lame_from_youngs(E: float, nu: float) -> tuple[float, float]:
    """Return (mu, lam) from Young's modulus and Poisson ratio."""
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return mu, lam


def polar_rotation(F: np.ndarray) -> np.ndarray:
    """Closest rotation to F in the Frobenius norm.

    Computed as R = U V^T from the SVD of F, flipping the last singular
    column pair when det(U V^T) < 0 so that det(R) = +1.  Accepts a single
    (d, d) matrix or a stacked (..., d, d) batch.
    """
    F = np.asarray(F, dtype=np.float64)
    U, _, Vt = np.linalg.svd(F)
    R = U @ Vt
    det = np.linalg.det(R)
    if F.ndim == 2:
        if det < 0.0:
            U = U.copy()
            U[:, -1] *= -1.0
            R = U @ Vt
        return R
    flip = det < 0.0
    if np.any(flip):
        U = U.copy()
        U[flip, :, -1] *= -1.0
        R = U @ Vt
    return R


def _polar_rotation_2x2(F: np.ndarray) -> np.ndarray:
    """Closed-form polar rotation for batched 2x2 matrices with det > 0.

    For det(F) > 0 the rotation factor is the normalization of
    [[a + d, b - c], [c - b, a + d]]; identical to the SVD route.
    """
    a = F[..., 0, 0]
    b = F[..., 0, 1]
    c = F[..., 1, 0]
    d = F[..., 1, 1]
    x = a + d
    y = c - b
    scale = 1.0 / np.sqrt(x * x + y * y)
    cos = x * scale
    sin = y * scale
    R = np.empty_like(F)
    R[..., 0, 0] = cos
    R[..., 0, 1] = -sin
    R[..., 1, 0] = sin
    R[..., 1, 1] = cos
    return R


def polar_rotation_batch(F: np.ndarray) -> np.ndarray:
    """Rotation factors for a (N, d, d) stack.

    Uses the closed 2x2 form when every determinant is positive (the hot
    path in the solver), otherwise defers to the SVD route.
    """
    F = np.asarray(F, dtype=np.float64)
    d = F.shape[-1]
    if d == 2:
        det = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        if np.all(det > 0.0):
            return _polar_rotation_2x2(F)
    return polar_rotation(F)


def corotated_energy(F: np.ndarray, mu: float, lam: float) -> float:
    """Energy density psi(F) for a single deformation gradient."""
    F = np.asarray(F, dtype=np.float64)
    s = np.linalg.svd(F, compute_uv=False)
    J = np.linalg.det(F)
    return float(mu * np.sum((s - 1.0) ** 2) + 0.5 * lam * (J - 1.0) ** 2)


def first_piola_stress(F: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """First Piola-Kirchhoff stress P(F) for (d, d) or (N, d, d) input."""
    F = np.asarray(F, dtype=np.float64)
    single = F.ndim == 2
    Fb = F[None] if single else F
    J = np.linalg.det(Fb)
    if np.any(J <= DET_F_MIN):
        raise InvertedElementError(f"det(F) <= {DET_F_MIN} in stress evaluation (min {J.min():.3e})")
    R = polar_rotation_batch(Fb)
    Finv_T = np.linalg.inv(Fb).transpose(0, 2, 1)
    P = 2.0 * mu * (Fb - R) + (lam * (J - 1.0) * J)[:, None, None] * Finv_T
    return P[0] if single else P


def fixed_corotated_stress(F: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """Cauchy stress sigma = P F^T / J for (d, d) or (N, d, d) input."""
    F = np.asarray(F, dtype=np.float64)
    single = F.ndim == 2
    Fb = F[None] if single else F
    J = np.linalg.det(Fb)
    if np.any(J <= DET_F_MIN):
        raise InvertedElementError(f"det(F) <= {DET_F_MIN} in stress evaluation (min {J.min():.3e})")
    P = first_piola_stress(Fb, mu, lam)
    sigma = P @ Fb.transpose(0, 2, 1) / J[:, None, None]
    return sigma[0] if single else sigma
