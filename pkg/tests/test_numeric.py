import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import max_relative_error
from udseg import autograd as ag
from udseg.autograd import Parameter, Tensor
from udseg.optim import (
    ADAGRAD_EPS,
    Adagrad,
    TrainConfig,
    adagrad_step,
    clip_global_norm,
    dropout,
    glorot_init,
    lr_schedule,
)
from udseg.recurrent import GRU, LSTMCell, reversal_index


class TestBackward:
    def test_linear(self):
        w = Parameter(np.array(2.0), "w")
        loss = w * 3.0
        ag.backward(loss)
        assert float(w.grad) == 3.0

    def test_sigmoid_at_zero(self):
        w = Parameter(np.array(0.0), "w")
        ag.backward(ag.sigmoid(w))
        assert float(w.grad) == pytest.approx(0.25)

    def test_sigmoid_is_finite_for_large_inputs(self):
        out = ag.sigmoid(Tensor(np.array([-800.0, 800.0]))).data
        np.testing.assert_array_equal(out, [0.0, 1.0])

    def test_needs_scalar(self):
        with pytest.raises(ValueError):
            ag.backward(Parameter(np.ones(3), "v"))

    def test_reused_node_accumulates(self):
        w = Parameter(np.array([1.0, 2.0]), "w")
        y = w * w
        ag.backward((y + y).sum())
        np.testing.assert_allclose(w.grad, 4 * w.data)

    def test_composite_ops(self):
        rng = np.random.default_rng(0)
        a = Parameter(rng.normal(size=(3, 4)), "a")
        b = Parameter(rng.normal(size=(4, 2)), "b")
        c = Parameter(rng.uniform(0.5, 2.0, size=(3, 2)), "c")
        idx = np.array([2, 0, 2])

        def loss():
            h = ag.tanh(a @ b) * ag.exp(ag.log(c) * 0.5)
            z = ag.concat([h, ag.sigmoid(h)], axis=-1)
            s = ag.softmax(z, axis=-1) + ag.log_softmax(z, axis=0)
            picked = z[idx][:, 1:3]
            stacked = ag.stack([picked, -picked * 2.0], axis=0)
            return ag.logsumexp(s, axis=1).sum() + stacked.sum() + ag.reshape(z, (12,))[5]

        assert max_relative_error(loss, [a, b, c]) < 1e-4

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_random_matmul_chains(self, seed):
        rng = np.random.default_rng(seed)
        x = Parameter(rng.normal(size=(2, 3)), "x")
        w = Parameter(rng.normal(size=(3, 3)), "w")

        def loss():
            return ag.logsumexp(ag.tanh(x @ w) @ w, axis=-1).sum()

        assert max_relative_error(loss, [x, w]) < 1e-4


class TestGlorot:
    def test_bound(self):
        rng = np.random.default_rng(0)
        w = glorot_init((50, 200), rng)
        b = math.sqrt(6 / 250)
        assert b == pytest.approx(0.15492, abs=1e-5)
        assert np.abs(w).max() <= b
        assert np.abs(w).max() > 0.9 * b

    def test_scalar_shape(self):
        w = glorot_init((1, 1), np.random.default_rng(1))
        assert abs(w[0, 0]) <= math.sqrt(3)

    def test_vector_fan_out_one(self):
        w = glorot_init((5,), np.random.default_rng(1))
        assert np.abs(w).max() <= math.sqrt(1.0)

    def test_reproducible(self):
        a = glorot_init((4, 3), np.random.default_rng(7))
        b = glorot_init((4, 3), np.random.default_rng(7))
        assert a.tobytes() == b.tobytes()


class TestAdagrad:
    def _param(self, grad):
        p = Parameter(np.zeros(1), "w")
        p.grad = np.array([grad])
        return p

    def test_single_step(self):
        p = adagrad_step(self._param(1.0), 0.1)
        assert p.accumulator[0] == 1.0
        assert p.data[0] == pytest.approx(-0.1 / (1 + ADAGRAD_EPS), abs=1e-15)
        assert p.grad is None

    def test_zero_gradient(self):
        p = adagrad_step(self._param(0.0), 0.1)
        assert p.data[0] == 0.0

    def test_two_steps(self):
        p = adagrad_step(self._param(1.0), 0.1)
        p.grad = np.array([1.0])
        adagrad_step(p, 0.1)
        assert p.data[0] == pytest.approx(-0.1 - 0.1 / math.sqrt(2), abs=1e-7)
        assert p.data[0] == pytest.approx(-0.17071, abs=1e-5)

    def test_optimizer_seeds_accumulator(self):
        p = Parameter(np.zeros(3), "w")
        Adagrad([p], TrainConfig())
        np.testing.assert_array_equal(p.accumulator, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=8))
    def test_accumulator_monotone(self, grads):
        p = Parameter(np.zeros(1), "w")
        prev = 0.0
        for g in grads:
            p.grad = np.array([g])
            adagrad_step(p, 0.1)
            assert p.accumulator[0] >= prev
            prev = p.accumulator[0]


class TestSchedule:
    def test_values(self):
        cfg = TrainConfig()
        assert lr_schedule(0, cfg) == 0.1
        assert lr_schedule(1, cfg) == pytest.approx(0.095238, abs=1e-6)
        assert lr_schedule(0, cfg, encdec=True) == 0.3

    def test_no_decay(self):
        cfg = TrainConfig(decay_rate=0.0)
        assert lr_schedule(25, cfg) == 0.1

    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.char_embedding_size, cfg.rnn_state_size, cfg.batch_size) == (50, 200, 10)
        assert (cfg.main_epochs, cfg.encdec_epochs, cfg.grad_clip_norm, cfg.dropout_rate) == (30, 50, 5.0, 0.5)
        assert TrainConfig.from_dict({k: str(v) for k, v in cfg.as_dict().items()}) == cfg

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            TrainConfig(dropout_rate=1.0)


class TestClip:
    def test_scaled(self):
        out, norm = clip_global_norm([np.array([6.0, 8.0])])
        assert norm == 10.0
        np.testing.assert_allclose(out[0], [3.0, 4.0])

    def test_small_and_zero_unchanged(self):
        out, _ = clip_global_norm([np.array([0.6, 0.8])])
        np.testing.assert_array_equal(out[0], [0.6, 0.8])
        out, _ = clip_global_norm([np.zeros(3)])
        np.testing.assert_array_equal(out[0], 0.0)

    def test_global_over_several(self):
        out, norm = clip_global_norm([np.array([3.0]), np.array([4.0, 0.0])], 1.0)
        assert norm == 5.0
        assert math.sqrt(sum(float((g ** 2).sum()) for g in out)) == pytest.approx(1.0)


class TestDropout:
    def test_inference_identity(self):
        x = Tensor(np.ones(5))
        assert dropout(x, 0.5, False, np.random.default_rng(0)) is x

    def test_zero_rate(self):
        x = Tensor(np.ones(5))
        assert dropout(x, 0.0, True, np.random.default_rng(0)) is x

    def test_mean_preserved(self):
        out = dropout(Tensor(np.ones(100_000)), 0.5, True, np.random.default_rng(0)).data
        assert abs(out.mean() - 1.0) < 0.02
        assert set(np.unique(out)) == {0.0, 2.0}


class TestGRU:
    def test_zero_weights_give_zero_states(self):
        gru = GRU("g", 3, 4, np.random.default_rng(0))
        for p in gru.parameters():
            p.data[...] = 0.0
        out = gru.run(Tensor(np.random.default_rng(1).normal(size=(2, 5, 3)))).data
        np.testing.assert_array_equal(out, 0.0)

    def test_matches_reference_recurrence(self):
        rng = np.random.default_rng(2)
        gru = GRU("g", 3, 4, rng)
        gru.b.data = rng.normal(size=12)
        x = rng.normal(size=(1, 3, 3))
        W, Uzr, Un, b, H = gru.W.data, gru.U_zr.data, gru.U_n.data, gru.b.data, 4
        sig = lambda v: 1 / (1 + np.exp(-v))  # noqa: E731
        h = np.zeros(H)
        for t in range(3):
            p = x[0, t] @ W + b
            z = sig(p[:H] + h @ Uzr[:, :H])
            r = sig(p[H: 2 * H] + h @ Uzr[:, H:])
            n = np.tanh(p[2 * H:] + (r * h) @ Un)
            h = z * h + (1 - z) * n
        np.testing.assert_allclose(gru.run(Tensor(x)).data[0, -1], h, atol=1e-12)

    def test_step_gradient(self):
        rng = np.random.default_rng(3)
        gru = GRU("g", 3, 4, rng)
        gru.b.data = rng.normal(size=12) * 0.5
        x = Parameter(rng.normal(size=(2, 2, 3)), "x")
        assert max_relative_error(lambda: gru.run(x).sum(), gru.parameters() + [x]) < 1e-4

    def test_bigru_gradient_t4(self):
        rng = np.random.default_rng(4)
        fw, bw = GRU("f", 3, 3, rng), GRU("b", 3, 3, rng)
        x = Parameter(rng.normal(size=(2, 4, 3)), "x")
        lengths = [4, 3]
        rows, cols = reversal_index(lengths, 4)
        weights = rng.normal(size=(2, 4, 6))

        def loss():
            h = ag.concat([fw.run(x), bw.run(x[rows, cols])[rows, cols]], axis=-1)
            return (h * weights).sum()

        assert max_relative_error(loss, fw.parameters() + bw.parameters() + [x]) < 1e-4

    def test_reversal_is_involution(self):
        rows, cols = reversal_index([3, 1, 5], 5)
        np.testing.assert_array_equal(cols[0], [2, 1, 0, 3, 4])
        np.testing.assert_array_equal(cols[1], [0, 1, 2, 3, 4])
        a = np.arange(15).reshape(3, 5)
        np.testing.assert_array_equal(a[rows, cols][rows, cols], a)


class TestLSTM:
    def test_step_gradient(self):
        rng = np.random.default_rng(5)
        cell = LSTMCell("l", 3, 4, rng)
        cell.b.data = rng.normal(size=16) * 0.5
        x1 = Parameter(rng.normal(size=(2, 3)), "x1")
        x2 = Parameter(rng.normal(size=(2, 3)), "x2")

        def loss():
            h, c = cell.step(x1)
            h, c = cell.step(x2, (h, c))
            return (h * 1.5).sum() + c.sum()

        assert max_relative_error(loss, cell.parameters() + [x1, x2]) < 1e-4
