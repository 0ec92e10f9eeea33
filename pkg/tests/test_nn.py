# FILE: tests/test_nn.py
# ============================================================================
import math

import numpy as np
import pytest

from app.exceptions import InvalidArgumentError
from app.nn import functional as F
from app.nn.layers import GRU, BatchNorm, Dropout, Linear, MultiHeadAttention, ReLU, Sigmoid
from app.nn.optim import AdamState, adam_step


def check_layer_gradients(layer, x, fd, rel_err, tol=1e-6, seed=7):
    """Compare backward against central differences for input and every parameter."""
    weights = np.random.default_rng(seed).normal(size=layer.forward(x).shape)

    def loss():
        return float(np.sum(weights * layer.forward(x)))

    loss()
    dx = layer.backward(weights)
    assert rel_err(dx, fd(loss, x)) <= tol
    for name, value in layer.params.items():
        loss()
        layer.backward(weights)
        analytic = layer.grads[name].copy()
        assert rel_err(analytic, fd(loss, value)) <= tol, name


class TestLinear:
    def test_forward(self):
        x = np.array([[1.0, 2.0]])
        W = np.array([[1.0, 0.0, -1.0], [0.5, 2.0, 1.0]])
        b = np.array([0.1, 0.2, 0.3])
        assert np.allclose(F.linear_forward(x, W, b), [[2.1, 4.2, 1.3]])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            F.linear_forward(np.zeros((2, 3)), np.zeros((4, 5)), np.zeros(5))

    def test_gradients(self, rng, fd, rel_err):
        check_layer_gradients(Linear(5, 3, rng), rng.normal(size=(4, 5)), fd, rel_err)

    def test_init_bounds(self, rng):
        layer = Linear(16, 8, rng)
        assert np.all(np.abs(layer.params["W"]) <= 0.25)


class TestActivations:
    def test_relu_gradient(self, rng, fd, rel_err):
        x = rng.normal(size=(3, 4))
        x[np.abs(x) < 1e-3] = 0.5
        check_layer_gradients(ReLU(), x, fd, rel_err)

    def test_sigmoid_gradient(self, rng, fd, rel_err):
        check_layer_gradients(Sigmoid(), rng.normal(size=(3, 4)), fd, rel_err)

    def test_sigmoid_saturates_without_overflow(self):
        y = F.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        assert np.allclose(y, [0.0, 0.5, 1.0])


class TestGRU:
    def test_zero_weights_halve_state(self, rng):
        layer = GRU(3, 4, rng)
        for value in layer.params.values():
            value[...] = 0.0
        h_prev = rng.normal(size=(2, 4))
        _, h = layer.forward(rng.normal(size=(2, 1, 3)), h_prev)
        assert np.allclose(h, 0.5 * h_prev)

    def test_last_output_is_final_state(self, rng):
        layer = GRU(3, 4, rng)
        outputs, h = layer.forward(rng.normal(size=(2, 5, 3)))
        assert outputs.shape == (2, 5, 4)
        assert np.array_equal(outputs[:, -1, :], h)

    def test_gradients(self, rng, fd, rel_err):
        layer = GRU(3, 4, rng)
        x = rng.normal(size=(2, 5, 3))
        h0 = rng.normal(size=(2, 4))
        weights = rng.normal(size=(2, 5, 4))

        def loss():
            return float(np.sum(weights * layer.forward(x, h0)[0]))

        loss()
        dx, dh0 = layer.backward(weights)
        assert rel_err(dx, fd(loss, x)) <= 1e-6
        assert rel_err(dh0, fd(loss, h0)) <= 1e-6
        for name, value in layer.params.items():
            loss()
            layer.backward(weights)
            assert rel_err(layer.grads[name].copy(), fd(loss, value)) <= 1e-6, name

    def test_wrong_width(self, rng):
        with pytest.raises(InvalidArgumentError):
            GRU(3, 4, rng).forward(np.zeros((1, 2, 5)))


class TestBatchNorm:
    def test_constant_column_gives_beta(self):
        layer = BatchNorm(2).train()
        layer.params["beta"][...] = [0.3, -0.7]
        x = np.column_stack([np.full(5, 4.0), np.arange(5.0)])
        y = layer.forward(x)
        assert np.allclose(y[:, 0], 0.3)
        assert y[:, 1].mean() == pytest.approx(-0.7)

    def test_single_row_rejected_in_training(self):
        with pytest.raises(InvalidArgumentError):
            BatchNorm(3).train().forward(np.ones((1, 3)))

    def test_eval_uses_running_stats(self, rng):
        layer = BatchNorm(3)
        x = rng.normal(size=(1, 3))
        assert np.allclose(layer.forward(x), x / math.sqrt(1.0 + F.BN_EPS))

    def test_running_stats_update(self):
        layer = BatchNorm(1).train()
        layer.forward(np.array([[1.0], [3.0]]))
        assert layer.running_mean[0] == pytest.approx(0.2)
        assert layer.running_var[0] == pytest.approx(0.9 + 0.1 * 1.0)

    def test_train_gradients(self, rng, fd, rel_err):
        check_layer_gradients(BatchNorm(3).train(), rng.normal(size=(6, 3)), fd, rel_err)

    def test_eval_gradients(self, rng, fd, rel_err):
        layer = BatchNorm(3)
        layer.running_mean[...] = rng.normal(size=3)
        layer.running_var[...] = rng.uniform(0.5, 2.0, size=3)
        check_layer_gradients(layer, rng.normal(size=(2, 4, 3)), fd, rel_err)


class TestAttention:
    def test_single_token_passes_values_through(self, rng):
        layer = MultiHeadAttention(8, 4, rng)
        x = rng.normal(size=(3, 1, 8))
        w = layer.weights()
        values = np.concatenate([x[:, 0, :] @ w.w_v[h] for h in range(4)], axis=-1)
        assert np.allclose(layer.forward(x)[:, 0, :], values @ w.w_o)

    def test_identical_rows_attend_uniformly(self, rng):
        layer = MultiHeadAttention(8, 4, rng)
        row = rng.normal(size=8)
        _, cache = F.multi_head_attention(np.tile(row, (1, 2, 1)), layer.weights())
        assert np.allclose(cache[4], 0.5)

    def test_matches_direct_recompute(self, rng):
        layer = MultiHeadAttention(8, 2, rng)
        x = rng.normal(size=(2, 3, 8))
        w = layer.weights()
        heads = []
        for h in range(2):
            q, k, v = x @ w.w_q[h], x @ w.w_k[h], x @ w.w_v[h]
            scores = q @ k.transpose(0, 2, 1) / math.sqrt(4)
            attn = np.exp(scores - scores.max(axis=-1, keepdims=True))
            attn /= attn.sum(axis=-1, keepdims=True)
            heads.append(attn @ v)
        assert np.allclose(layer.forward(x), np.concatenate(heads, axis=-1) @ w.w_o)

    def test_large_inputs_stay_finite(self, rng):
        layer = MultiHeadAttention(8, 4, rng)
        x = rng.uniform(-1e3, 1e3, size=(2, 5, 8))
        _, cache = F.multi_head_attention(x, layer.weights())
        assert np.all(np.isfinite(layer.forward(x)))
        assert np.allclose(cache[4].sum(axis=-1), 1.0, atol=1e-12, rtol=0)

    def test_gradients(self, rng, fd, rel_err):
        check_layer_gradients(MultiHeadAttention(8, 4, rng), rng.normal(size=(2, 3, 8)), fd, rel_err)

    def test_head_split_must_cover_width(self, rng):
        with pytest.raises(InvalidArgumentError):
            F.AttentionWeights(
                w_q=np.zeros((3, 8, 2)), w_k=np.zeros((3, 8, 2)), w_v=np.zeros((3, 8, 2)), w_o=np.zeros((6, 8))
            )


class TestDropout:
    def test_drop_fraction(self):
        layer = Dropout(0.1, np.random.default_rng(0)).train()
        y = layer.forward(np.ones(100_000))
        assert np.mean(y == 0.0) == pytest.approx(0.1, abs=0.01)
        assert np.allclose(y[y != 0.0], 1.0 / 0.9)

    def test_identity_in_eval(self, rng):
        x = rng.normal(size=(4, 5))
        assert np.array_equal(Dropout(0.1, rng).forward(x), x)


class TestLoss:
    def test_half_prediction(self):
        loss, _ = F.bce_loss(np.full(6, 0.5), np.array([1, 0, 1, 1, 0, 0]))
        assert loss == pytest.approx(math.log(2.0))

    def test_clamped_extremes_stay_finite(self):
        loss, grad = F.bce_loss(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        assert np.isfinite(loss)
        assert np.all(np.isfinite(grad))

    def test_gradient(self, rng, fd, rel_err):
        m = rng.uniform(0.1, 0.9, size=(3, 4))
        t = (rng.random((3, 4)) < 0.5).astype(float)
        _, grad = F.bce_loss(m, t)
        assert rel_err(grad, fd(lambda: F.bce_loss(m, t)[0], m)) <= 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            F.bce_loss(np.zeros(3), np.zeros(4))


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        params = {"w": np.array([1.0, -2.0, 3.0])}
        grads = {"w": np.array([0.5, -4.0, 1e-3])}
        adam_step(params, grads, AdamState(lr=1e-3))
        assert np.allclose(params["w"], [1.0 - 1e-3, -2.0 + 1e-3, 3.0 - 1e-3], atol=1e-8)

    def test_zero_gradient_leaves_parameters(self):
        params = {"w": np.array([1.0, 2.0])}
        adam_step(params, {"w": np.zeros(2)}, AdamState())
        assert np.array_equal(params["w"], [1.0, 2.0])

    def test_step_counter(self):
        state = AdamState()
        for _ in range(3):
            adam_step({"w": np.zeros(1)}, {"w": np.ones(1)}, state)
        assert state.step == 3

    def test_descends_convex_quadratic(self):
        curvature = np.array([1.0, 4.0, 0.5])
        params = {"w": np.array([2.0, -3.0, 5.0])}
        state = AdamState(lr=1e-2)
        losses = []
        for _ in range(100):
            w = params["w"]
            losses.append(float(0.5 * np.sum(curvature * w ** 2)))
            adam_step(params, {"w": curvature * w}, state)
        assert np.all(np.diff(losses[10:]) < 0.0)
        assert losses[-1] < losses[0]
        assert np.all(np.abs(params["w"]) < [2.0, 3.0, 5.0])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState())
