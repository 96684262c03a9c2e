import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from f0lstm import lstm, weights_io
from f0lstm.lstm import (
    Architecture,
    EarlyStopping,
    TrainConfig,
    backward,
    check_gradients,
    clip_gradient,
    forward,
    init_random,
    loss_and_grad,
    sse_loss,
    train,
)


def zero_weights(arch):
    w = init_random(arch, 0)
    for _, p in w.named_params():
        p[...] = 0.0
    return w


def scalar_cell():
    """hidden 1, input 1, output 1 with hand-set parameters (gate order i, f, o, g)."""
    w = zero_weights(Architecture(1, (1,), 1))
    w.layers[0]["Wx"][:, 0] = [0.5, -0.5, 1.0, 2.0]
    w.layers[0]["Wh"][:, 0] = [0.3, 0.2, -0.4, 0.1]
    w.layers[0]["b"][:] = [0.0, 1.0, 0.0, -1.0]
    w.proj_W[...] = 2.0
    w.proj_b[...] = 0.1
    return w


class TestInit:
    def test_deterministic(self):
        arch = Architecture(15, (32,), 15)
        assert weights_io.dumps(init_random(arch, 3)) == weights_io.dumps(init_random(arch, 3))

    def test_shapes(self):
        w = init_random(Architecture(15, (32,), 15), 0)
        for gate in lstm.GATES:
            blocks = w.gate(0, gate)
            assert blocks["Wx"].shape == (32, 15)
            assert blocks["Wh"].shape == (32, 32)
            assert blocks["b"].shape == (32,)
        assert w.proj_W.shape == (15, 32)

    @pytest.mark.parametrize("seed", [0, 1, 17])
    def test_ranges(self, seed):
        arch = Architecture(7, (5, 9), 4)
        w = init_random(arch, seed)
        for k, (n_in, h) in enumerate(zip(arch.layer_inputs, arch.hidden)):
            for gate in lstm.GATES:
                blocks = w.gate(k, gate)
                assert np.all(np.abs(blocks["Wx"]) <= math.sqrt(6 / (n_in + h)))
                assert np.all(np.abs(blocks["Wh"]) <= math.sqrt(6 / (h + h)))
                expected_bias = 1.0 if gate == "forget" else 0.0
                assert np.all(blocks["b"] == expected_bias)
        assert np.all(np.abs(w.proj_W) <= math.sqrt(6 / (4 + 9)))

    def test_degenerate_dims(self):
        with pytest.raises(ValueError):
            Architecture(3, (0,), 3)
        with pytest.raises(ValueError):
            Architecture(3, (), 3)


class TestForward:
    def test_zero_weights(self):
        w = zero_weights(Architecture(4, (3, 2), 4))
        cache = forward(w, np.random.default_rng(0).standard_normal((6, 4)))
        for layer in cache.layers:
            assert np.all(layer.gates[:, : 3 * layer.h.shape[1]] == 0.5)
        assert np.all(cache.outputs == 0.0)

    def test_hand_computed_single_step(self):
        out = forward(scalar_cell(), np.array([[1.0]])).outputs
        # i = sig(0.5), o = sig(1), g = tanh(1), c = i*g, h = o*tanh(c), y = 2h + 0.1
        assert out[0, 0] == pytest.approx(0.7454881627661045, abs=1e-15)

    def test_hand_computed_two_steps(self):
        out = forward(scalar_cell(), np.array([[1.0], [-0.5]])).outputs
        assert out[1, 0] == pytest.approx(0.05112740307013395, abs=1e-15)

    @pytest.mark.parametrize("T", [1, 7, 30])
    def test_shapes(self, T):
        w = init_random(Architecture(5, (4, 6), 3), 0)
        cache = forward(w, np.ones((T, 5)))
        assert len(cache) == T
        assert cache.outputs.shape == (T, 3)
        assert all(layer.h.shape[0] == T for layer in cache.layers)

    def test_errors(self):
        w = init_random(Architecture(5, (4,), 3), 0)
        with pytest.raises(ValueError):
            forward(w, np.ones((3, 4)))
        with pytest.raises(ValueError):
            forward(w, np.full((3, 5), np.nan))
        with pytest.raises(ValueError):
            forward(w, np.ones((0, 5)))

    def test_purity(self):
        w = init_random(Architecture(5, (4, 4), 5), 2)
        before = weights_io.dumps(w)
        forward(w, np.random.default_rng(1).standard_normal((20, 5)))
        assert weights_io.dumps(w) == before

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), scale=st.floats(0.1, 50.0))
    def test_gate_ranges(self, seed, scale):
        w = init_random(Architecture(3, (5,), 2), seed)
        x = np.random.default_rng(seed).standard_normal((10, 3)) * scale
        layer = forward(w, x).layers[0]
        H = 5
        sig = layer.gates[:, : 3 * H]
        cand = layer.gates[:, 3 * H :]
        # tanh/sigmoid saturate to exactly 0 or 1 in floating point for huge inputs
        assert np.all((sig >= 0) & (sig <= 1))
        assert np.all((cand >= -1) & (cand <= 1))
        if scale < 5:
            assert np.all((sig > 0) & (sig < 1)) and np.all(np.abs(cand) < 1)


class TestLoss:
    def test_identity(self):
        x = np.random.default_rng(0).standard_normal((4, 3))
        assert sse_loss(x, x) == 0.0

    def test_unit_offsets(self):
        t = np.random.default_rng(0).standard_normal((6, 5))
        assert sse_loss(t + 1.0, t) == pytest.approx(30.0)

    def test_brute_force(self):
        rng = np.random.default_rng(4)
        a, b = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
        total = 0.0
        for t in range(3):
            for k in range(2):
                total += (a[t][k] - b[t][k]) ** 2
        assert sse_loss(a, b) == pytest.approx(total, rel=1e-15)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            sse_loss(np.zeros((3, 2)), np.zeros((3, 3)))


class TestBackward:
    def test_zero_gradient_at_target(self):
        w = init_random(Architecture(3, (4,), 3), 0)
        x = np.random.default_rng(0).standard_normal((5, 3))
        cache = forward(w, x)
        grad = backward(w, cache, cache.outputs.copy())
        assert all(np.all(g == 0) for _, g in grad.named_params())

    def test_projection_bias_closed_form(self):
        w = init_random(Architecture(3, (4,), 2), 1)
        rng = np.random.default_rng(1)
        x, y = rng.standard_normal((5, 3)), rng.standard_normal((5, 2))
        cache = forward(w, x)
        grad = backward(w, cache, y)
        np.testing.assert_allclose(grad.proj_b, np.sum(2 * (cache.outputs - y), axis=0), rtol=1e-12)

    def test_mismatched_targets(self):
        w = init_random(Architecture(3, (4,), 2), 1)
        cache = forward(w, np.ones((5, 3)))
        with pytest.raises(ValueError):
            backward(w, cache, np.ones((5, 3)))
        other = init_random(Architecture(3, (4, 4), 2), 1)
        with pytest.raises(ValueError):
            backward(other, cache, np.ones((5, 2)))


class TestGradientCheck:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_single_layer(self, seed):
        assert check_gradients(Architecture(3, (4,), 3), seed, T=5) < 1e-5

    def test_two_layers(self):
        assert check_gradients(Architecture(3, (4, 5), 3), 7, T=5) < 1e-5

    def test_detects_corruption(self):
        def negate(vec):
            j = int(np.argmax(np.abs(vec)))
            vec[j] = -vec[j]

        assert check_gradients(Architecture(3, (4,), 3), 0, corrupt=negate) > 1e-2


class TestClipping:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), clip=st.floats(0.01, 10.0))
    def test_post_clip_norm(self, seed, clip):
        w = init_random(Architecture(3, (4,), 3), seed)
        rng = np.random.default_rng(seed)
        _, grad = loss_and_grad(w, rng.standard_normal((6, 3)) * 5, rng.standard_normal((6, 3)) * 5)
        clip_gradient(grad, clip)
        norm = math.sqrt(sum(float(np.sum(g * g)) for _, g in grad.named_params()))
        assert norm <= clip * (1 + 1e-12)


def tiny_task(n=8, T=12, seed=0):
    """Target is a leaky running average of the input: needs the recurrence."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        x = rng.standard_normal((T, 2))
        y = np.zeros_like(x)
        acc = np.zeros(2)
        for t in range(T):
            acc = 0.6 * acc + 0.4 * x[t]
            y[t] = acc
        pairs.append((x, y))
    return pairs


class TestTrain:
    def test_zero_loss_fixture_stops_after_patience(self):
        w = zero_weights(Architecture(2, (3,), 2))
        data = [(np.zeros((4, 2)), np.zeros((4, 2)))] * 3
        final, rec = train(w, data, data, TrainConfig(patience=5, max_epochs=100))
        assert rec.val_sse[0] == pytest.approx(0.0, abs=1e-12)
        assert rec.epochs == 1 + 5
        assert rec.stop_reason == "patience_exhausted"

    def test_tiny_task_converges(self):
        pairs = tiny_task()
        w = init_random(Architecture(2, (8,), 2), 0)
        cfg = TrainConfig(learning_rate=1e-2, patience=40, max_epochs=200, seed=0)
        _, rec = train(w, pairs[:6], pairs[6:], cfg)
        assert rec.best_validation_sse < 0.5 * rec.val_sse[0]
        assert rec.epochs <= 200

    def test_record_invariants_and_best_snapshot(self):
        pairs = tiny_task(seed=3)
        w = init_random(Architecture(2, (6,), 2), 1)
        cfg = TrainConfig(learning_rate=3e-2, momentum=0.5, patience=5, max_epochs=60, seed=2)
        final, rec = train(w, pairs[:6], pairs[6:], cfg)
        assert rec.best_validation_sse == min(rec.val_sse)
        assert rec.best_epoch == rec.val_sse.index(min(rec.val_sse)) + 1
        assert rec.epochs - rec.best_epoch <= cfg.patience
        assert lstm.evaluate(final, pairs[6:]) == pytest.approx(rec.best_validation_sse, rel=1e-12)

    def test_deterministic(self):
        pairs = tiny_task(seed=5)
        w = init_random(Architecture(2, (4,), 2), 0)
        cfg = TrainConfig(learning_rate=1e-2, patience=3, max_epochs=15, seed=9, optimizer="adam")
        a, ra = train(w, pairs[:6], pairs[6:], cfg)
        b, rb = train(w, pairs[:6], pairs[6:], cfg)
        assert weights_io.dumps(a) == weights_io.dumps(b)
        assert ra.val_sse == rb.val_sse and ra.train_sse == rb.train_sse

    def test_init_untouched(self):
        pairs = tiny_task()
        w = init_random(Architecture(2, (4,), 2), 0)
        before = weights_io.dumps(w)
        train(w, pairs[:6], pairs[6:], TrainConfig(learning_rate=1e-2, max_epochs=3))
        assert weights_io.dumps(w) == before

    def test_divergence_is_reported(self):
        pairs = tiny_task()
        w = init_random(Architecture(2, (4,), 2), 0)
        bad = [(x, y * np.inf) for x, y in pairs]
        with pytest.raises(lstm.TrainingDiverged):
            train(w, bad, pairs, TrainConfig(max_epochs=2))

    def test_empty_sets(self):
        w = init_random(Architecture(2, (4,), 2), 0)
        with pytest.raises(ValueError):
            train(w, [], tiny_task(), TrainConfig())

    def test_max_epochs_stop(self):
        pairs = tiny_task()
        w = init_random(Architecture(2, (4,), 2), 0)
        _, rec = train(w, pairs[:6], pairs[6:], TrainConfig(learning_rate=1e-2, patience=40, max_epochs=4))
        assert rec.epochs == 4 and rec.stop_reason == "max_epochs"


def test_early_stopping_monitor():
    stop = EarlyStopping(patience=3)
    for value in [5.0, 4.0, 4.0, 4.5, 4.0]:
        stop.update(value)
    assert stop.best_epoch == 2 and stop.exhausted
