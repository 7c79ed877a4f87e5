import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpmrom.errors import ConfigError, OutOfDomainError
from mpmrom.grid import BackgroundGrid, bspline_weights, bspline_weights_1d


def make_grid(d=2, n=12, dx=0.1):
    return BackgroundGrid(np.zeros(d), dx, np.full(d, n))


class TestBsplinePieces:
    def test_center_value(self):
        # a point sitting exactly on a node: that node gets 3/4
        w, _ = bspline_weights_1d(np.array([1.0]))
        assert w[1, 0] == pytest.approx(0.75, abs=1e-15)
        assert w[0, 0] == pytest.approx(0.125, abs=1e-15)
        assert w[2, 0] == pytest.approx(0.125, abs=1e-15)

    def test_half_cell_value(self):
        # half a cell from a node: that node gets 1/2
        w, _ = bspline_weights_1d(np.array([0.5]))
        assert w[0, 0] == pytest.approx(0.5, abs=1e-15)
        assert w[1, 0] == pytest.approx(0.5, abs=1e-15)
        assert w[2, 0] == pytest.approx(0.0, abs=1e-15)

    def test_gradient_is_weight_derivative(self):
        fx = np.linspace(0.5, 1.5, 31, endpoint=False)
        h = 1e-7
        wp, _ = bspline_weights_1d(fx + h)
        wm, _ = bspline_weights_1d(fx - h)
        _, dw = bspline_weights_1d(fx)
        assert np.allclose((wp - wm) / (2 * h), dw, atol=1e-6)


class TestTensorProduct:
    @pytest.mark.parametrize("d", [2, 3])
    def test_partition_of_unity_1000_points(self, d, rng):
        grid = make_grid(d=d, n=10, dx=0.07)
        lo = grid.origin + 1.51 * grid.dx
        hi = grid.origin + (grid.node_counts - 1 - 1.51) * grid.dx
        pts = rng.uniform(lo, hi, size=(1000, d))
        for x in pts:
            nodes, w, grad = bspline_weights(grid, x)
            assert abs(w.sum() - 1.0) < 1e-12
            assert np.all(np.abs(grad.sum(axis=0)) < 1e-10)
            assert np.all(w >= 0.0)
            assert nodes.shape == (3**d,)

    def test_on_node_weights(self):
        grid = make_grid(d=2, n=10, dx=0.5)
        # point exactly on node (4, 4)
        nodes, w, _ = bspline_weights(grid, np.array([2.0, 2.0]))
        center_flat = 4 * grid.strides[0] + 4 * grid.strides[1]
        assert w[nodes == center_flat][0] == pytest.approx(0.5625, abs=1e-15)  # 0.75^2

    def test_gradient_against_finite_difference(self, rng):
        grid = make_grid(d=2, n=12, dx=0.11)
        h = 1e-7
        for _ in range(20):
            x = rng.uniform(0.25, 0.9, size=2)
            nodes, _, grad = bspline_weights(grid, x)
            for j in range(2):
                xp, xm = x.copy(), x.copy()
                xp[j] += h
                xm[j] -= h
                np_, wp, _ = bspline_weights(grid, xp)
                nm_, wm, _ = bspline_weights(grid, xm)
                assert np.array_equal(np_, nodes) and np.array_equal(nm_, nodes)
                assert np.allclose((wp - wm) / (2 * h), grad[:, j], atol=1e-5)


@settings(max_examples=50, deadline=None)
@given(
    x=st.floats(0.2, 0.99),
    y=st.floats(0.2, 0.99),
)
def test_partition_of_unity_property(x, y):
    grid = BackgroundGrid(np.zeros(2), 0.1, np.array([14, 14]))
    _, w, grad = bspline_weights(grid, np.array([x, y]))
    assert abs(w.sum() - 1.0) < 1e-12
    assert np.all(np.abs(grad.sum(axis=0)) < 1e-10)


class TestGridBounds:
    def test_out_of_domain_raises(self):
        grid = make_grid(d=2)
        with pytest.raises(OutOfDomainError):
            grid.base_and_offset(np.array([-0.05, 0.5]))
        with pytest.raises(OutOfDomainError):
            grid.base_and_offset(np.array([[0.5, 0.5], [0.5, 1.2]]))

    def test_offsets_in_stencil_range(self, rng):
        grid = make_grid(d=3, n=8, dx=0.2)
        pts = rng.uniform(0.35, 1.0, size=(100, 3))
        base, fx = grid.base_and_offset(pts)
        assert np.all(fx >= 0.5) and np.all(fx < 1.5)
        assert np.all(base >= 0) and np.all(base + 2 < 8)

    def test_validation(self):
        with pytest.raises(ConfigError):
            BackgroundGrid(np.zeros(2), -0.1, np.array([8, 8]))
        with pytest.raises(ConfigError):
            BackgroundGrid(np.zeros(4), 0.1, np.array([8, 8, 8, 8]))
        with pytest.raises(ConfigError):
            BackgroundGrid(np.zeros(2), 0.1, np.array([3, 8]))

    def test_node_positions_layout(self):
        grid = BackgroundGrid(np.array([1.0, 2.0]), 0.5, np.array([4, 5]))
        pos = grid.node_positions()
        assert pos.shape == (20, 2)
        # C order: second index fastest
        assert np.allclose(pos[0], [1.0, 2.0])
        assert np.allclose(pos[1], [1.0, 2.5])
        assert np.allclose(pos[5], [1.5, 2.0])
        flat = 2 * grid.strides[0] + 3 * grid.strides[1]
        assert np.allclose(pos[flat], [2.0, 3.5])
