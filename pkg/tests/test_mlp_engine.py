"""Finite-difference validation of the dense-layer engine.

Every backprop pathway (value, Jacobian, tangent) is checked against
central differences on a small ELU net before anything is built on top.
"""

import numpy as np
import pytest

from mpmrom import kernels
from mpmrom.kernels import reference as ref_kernels
from mpmrom.manifold.mlp import (
    DenseLayer,
    backward_tape,
    forward,
    forward_tape,
    pack_layers,
    tangent_spatial_jacobian,
    xavier_layers,
)


def tiny_net(rng, sizes=(4, 6, 5, 3)):
    acts = ["elu"] * (len(sizes) - 2) + ["identity"]
    layers = xavier_layers(list(sizes), acts, rng)
    for l in layers:
        l.bias[:] = 0.3 * rng.standard_normal(l.bias.shape)
    return layers


def flatten_params(layers):
    return np.concatenate([np.concatenate([l.weight.ravel(), l.bias]) for l in layers])


def set_params(layers, theta):
    o = 0
    for l in layers:
        n = l.weight.size
        l.weight[:] = theta[o : o + n].reshape(l.weight.shape)
        o += n
        l.bias[:] = theta[o : o + l.bias.size]
        o += l.bias.size


def numerical_grad(f, theta, h=1e-6):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (f(tp) - f(tm)) / (2 * h)
    return g


@pytest.fixture
def setup(rng):
    layers = tiny_net(rng)
    N = 5
    U = rng.standard_normal((N, 4))
    T = rng.standard_normal((N, 4))
    # fixed random loss weights make the scalar losses generic
    Wy = rng.standard_normal((N, 3))
    WG = rng.standard_normal((N, 3, 2))
    Wt = rng.standard_normal((N, 3))
    return layers, U, T, Wy, WG, Wt


class TestForward:
    def test_identity_single_layer_is_affine(self, rng):
        layer = DenseLayer(rng.standard_normal((3, 4)), rng.standard_normal(3), "identity")
        U = rng.standard_normal((6, 4))
        assert np.allclose(forward([layer], U), U @ layer.weight.T + layer.bias, atol=1e-14)

    def test_zero_weights_give_biases(self, rng):
        layers = tiny_net(rng)
        for l in layers:
            l.weight[:] = 0.0
            l.bias[:] = 0.0
        layers[-1].bias[:] = [1.0, -2.0, 0.5]
        out = forward(layers, rng.standard_normal((4, 4)))
        assert np.allclose(out, [1.0, -2.0, 0.5], atol=1e-15)

    def test_jacobian_matches_finite_difference(self, setup):
        layers, U, _, _, _, _ = setup
        _, G, _, _ = forward_tape(layers, U, jac_cols=(1, 3))
        h = 1e-6
        for j in range(2):
            Up, Um = U.copy(), U.copy()
            Up[:, 1 + j] += h
            Um[:, 1 + j] -= h
            fd = (forward(layers, Up) - forward(layers, Um)) / (2 * h)
            assert np.allclose(G[:, :, j], fd, atol=1e-7)

    def test_tangent_matches_jacobian_product(self, setup):
        layers, U, T, _, _, _ = setup
        _, Gfull, tau, _ = forward_tape(layers, U, jac_cols=(0, 4), tangent=T)
        expected = np.einsum("nkj,nj->nk", Gfull, T)
        assert np.allclose(tau, expected, atol=1e-12)

    def test_second_mixed_derivative(self, setup):
        layers, U, T, _, _, _ = setup
        tau, TT = tangent_spatial_jacobian(layers, U, T, (0, 4))
        _, _, tau2, _ = forward_tape(layers, U, tangent=T)
        assert np.allclose(tau, tau2, atol=1e-13)
        h = 1e-6
        for j in range(4):
            Up, Um = U.copy(), U.copy()
            Up[:, j] += h
            Um[:, j] -= h
            _, _, tp, _ = forward_tape(layers, Up, tangent=T)
            _, _, tm, _ = forward_tape(layers, Um, tangent=T)
            assert np.allclose(TT[:, :, j], (tp - tm) / (2 * h), atol=1e-6)


class TestBackward:
    def loss(self, layers, U, T, Wy, WG, Wt, which):
        y, G, tau, _ = forward_tape(layers, U, jac_cols=(0, 4), tangent=T)
        val = 0.0
        if "y" in which:
            val += np.sum(Wy * y)
        if "G" in which:
            val += np.sum(WG * G[:, :, :2])
        if "t" in which:
            val += np.sum(Wt * tau)
        return val

    @pytest.mark.parametrize("which", ["y", "G", "t", "yGt"])
    def test_param_grads_match_fd(self, setup, which):
        layers, U, T, Wy, WG, Wt = setup
        theta0 = flatten_params(layers)

        def f(theta):
            set_params(layers, theta)
            return self.loss(layers, U, T, Wy, WG, Wt, which)

        num = numerical_grad(f, theta0)
        set_params(layers, theta0)
        y, G, tau, tape = forward_tape(layers, U, jac_cols=(0, 4), tangent=T)
        gy = Wy if "y" in which else None
        gG = None
        if "G" in which:
            gG = np.zeros_like(G)
            gG[:, :, :2] = WG
        gt = Wt if "t" in which else None
        grads, _, _ = backward_tape(layers, tape, gy, gG, gt)
        ana = np.concatenate([np.concatenate([dW.ravel(), db]) for dW, db in grads])
        denom = max(np.linalg.norm(num), 1e-12)
        assert np.linalg.norm(ana - num) / denom < 1e-7

    def test_input_grads_match_fd(self, setup):
        layers, U, T, Wy, WG, Wt = setup
        y, G, tau, tape = forward_tape(layers, U, jac_cols=(0, 4), tangent=T)
        gG = np.zeros_like(G)
        gG[:, :, :2] = WG
        _, gU, gT = backward_tape(layers, tape, Wy, gG, Wt)
        h = 1e-6

        def full_loss(Umod, Tmod):
            return self.loss(layers, Umod, Tmod, Wy, WG, Wt, "yGt")

        for n in range(U.shape[0]):
            for j in range(U.shape[1]):
                Up, Um = U.copy(), U.copy()
                Up[n, j] += h
                Um[n, j] -= h
                fd = (full_loss(Up, T) - full_loss(Um, T)) / (2 * h)
                assert abs(gU[n, j] - fd) < 2e-5 * max(1.0, abs(fd))
                Tp, Tm = T.copy(), T.copy()
                Tp[n, j] += h
                Tm[n, j] -= h
                fd_t = (full_loss(U, Tp) - full_loss(U, Tm)) / (2 * h)
                assert abs(gT[n, j] - fd_t) < 2e-5 * max(1.0, abs(fd_t))


class TestPackedKernels:
    def test_forward_matches_engine(self, rng):
        layers = tiny_net(rng)
        U = rng.standard_normal((20, 4))
        packed = pack_layers(layers)
        assert np.allclose(kernels.mlp_forward(*packed, U), forward(layers, U), atol=1e-13)
        assert np.allclose(ref_kernels.mlp_forward(*packed, U), forward(layers, U), atol=1e-13)

    def test_jacobian_matches_engine(self, rng):
        layers = tiny_net(rng)
        U = rng.standard_normal((15, 4))
        packed = pack_layers(layers)
        _, G, _, _ = forward_tape(layers, U, jac_cols=(1, 4))
        y1, J1 = kernels.mlp_jacobian_cols(*packed, U, 1, 4)
        y2, J2 = ref_kernels.mlp_jacobian_cols(*packed, U, 1, 4)
        assert np.allclose(J1, G, atol=1e-13)
        assert np.allclose(J2, G, atol=1e-13)
        assert np.allclose(y1, forward(layers, U), atol=1e-13)

    def test_tangent_matches_engine(self, rng):
        layers = tiny_net(rng)
        U = rng.standard_normal((15, 4))
        T = rng.standard_normal((15, 4))
        packed = pack_layers(layers)
        _, _, tau, _ = forward_tape(layers, U, tangent=T)
        y1, t1 = kernels.mlp_tangent(*packed, U, T)
        y2, t2 = ref_kernels.mlp_tangent(*packed, U, T)
        assert np.allclose(t1, tau, atol=1e-13)
        assert np.allclose(t2, tau, atol=1e-13)

    def test_single_linear_layer(self, rng):
        layer = DenseLayer(rng.standard_normal((2, 5)), rng.standard_normal(2), "identity")
        U = rng.standard_normal((7, 5))
        packed = pack_layers([layer])
        out = kernels.mlp_forward(*packed, U)
        assert np.allclose(out, U @ layer.weight.T + layer.bias, atol=1e-14)
