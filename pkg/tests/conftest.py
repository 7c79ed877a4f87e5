import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260818)


def random_def_grads(rng, n, d, spread=0.3):
    """Random deformation gradients with det F > 0 (perturbations of I)."""
    F = np.broadcast_to(np.eye(d), (n, d, d)) + spread * rng.standard_normal((n, d, d))
    det = np.linalg.det(F)
    flip = det <= 0.05
    while np.any(flip):
        F = F.copy()
        F[flip] = np.eye(d) + spread * rng.standard_normal((flip.sum(), d, d))
        det = np.linalg.det(F)
        flip = det <= 0.05
    return F
