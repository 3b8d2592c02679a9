import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsparam.errors import NonFiniteLoss, ShapeMismatch
from dsparam.optim import (
    AdamState, TrainConfig, TrainTrace, adam_step, epochs_to_convergence, sgd_step, tail_window, train,
)
from dsparam.params import forward, init_params
from dsparam.sampling import make_rng
from dsparam.tasks import MatrixDistanceTask, make_stream_mix


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(lr=0), dict(beta1=1.0), dict(beta2=-0.1),
                                    dict(optimizer="rmsprop"), dict(epochs=0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


class TestSgd:
    def test_zero_grad(self):
        assert np.array_equal(sgd_step([1.0, 2.0], [0.0, 0.0], 0.1), [1.0, 2.0])

    def test_single_step(self):
        assert sgd_step([1.0], [1.0], 0.1)[0] == pytest.approx(0.9)

    def test_steps_compose(self):
        x = sgd_step(sgd_step([0.0], [2.0], 0.1), [2.0], 0.1)
        assert x[0] == pytest.approx(-0.4)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            sgd_step([1.0, 2.0], [1.0], 0.1)


class TestAdam:
    def test_zero_grad(self):
        cfg = TrainConfig(lr=0.1)
        _, x = adam_step(AdamState.zeros(2), np.array([1.0, -1.0]), np.zeros(2), cfg)
        assert np.array_equal(x, [1.0, -1.0])

    @pytest.mark.parametrize("g", [3.0, -0.02, 1e4])
    def test_first_step_is_signed_lr(self, g):
        cfg = TrainConfig(lr=0.01, eps=1e-12)
        state, x = adam_step(AdamState.zeros(1), np.zeros(1), np.array([g]), cfg)
        assert x[0] == pytest.approx(-0.01 * np.sign(g), rel=1e-9)
        assert state.t == 1

    def test_matches_recurrence(self):
        cfg = TrainConfig(lr=0.05)
        grads = [0.4, -1.0, 2.5]
        m = v = 0.0
        ref = 1.0
        for t, g in enumerate(grads, 1):
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref -= 0.05 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        state, x = AdamState.zeros(1), np.array([1.0])
        for g in grads:
            state, x = adam_step(state, x, np.array([g]), cfg)
        assert x[0] == pytest.approx(ref, rel=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 1e3), st.floats(-1e2, 1e2).filter(lambda g: abs(g) > 1e-3))
    def test_scale_invariant_first_step(self, scale, g):
        cfg = TrainConfig(lr=1e-3)
        _, a = adam_step(AdamState.zeros(1), np.zeros(1), np.array([g]), cfg)
        _, b = adam_step(AdamState.zeros(1), np.zeros(1), np.array([scale * g]), cfg)
        assert a[0] == pytest.approx(b[0], rel=1e-4)


class TestConvergence:
    def test_constant(self):
        assert epochs_to_convergence([0.7] * 40) == 0

    def test_short_example(self):
        assert epochs_to_convergence([10, 1, 0.5, 0.5, 0.5]) == 2

    def test_monotone(self):
        loss = [1.0 / (k + 1) for k in range(100)] + [0.009] * 100
        final = np.mean(loss[-10:])
        expected = next(i for i, x in enumerate(loss) if x <= 1.05 * final)
        assert epochs_to_convergence(loss) == expected

    def test_window(self):
        assert tail_window(1) == 1
        assert tail_window(5) == 2
        assert tail_window(100) == 10
        assert tail_window(20000) == 1000

    def test_empty(self):
        with pytest.raises(ValueError):
            epochs_to_convergence([])

    def test_accepts_trace(self):
        assert epochs_to_convergence(TrainTrace(loss=[3.0, 1.0, 1.0, 1.0])) == 1


class TestTrain:
    def test_target_equals_start(self):
        p = init_params("go", 3, make_rng(0))
        task = MatrixDistanceTask(3, forward(p))
        trace = train(task, p, TrainConfig(lr=1e-2, epochs=20))
        assert max(trace.loss) < 1e-28
        assert len(trace.loss) == len(trace.grad_norm) == 20

    def test_deterministic(self):
        task = make_stream_mix(3, make_rng(4), n_samples=20)
        init = lambda r: init_params("go", 3, r, s=2)
        a = train(task, init, TrainConfig(lr=1e-2, epochs=50, seed=3))
        b = train(task, init, TrainConfig(lr=1e-2, epochs=50, seed=3))
        assert a.loss == b.loss and a.grad_norm == b.grad_norm
        assert np.array_equal(a.params.flat, b.params.flat)

    def test_sgd_decreases_loss(self):
        task = MatrixDistanceTask(2, np.array([[0.2, 0.8], [0.8, 0.2]]))
        trace = train(task, init_params("lite", 2, make_rng(0)), TrainConfig(lr=0.5, optimizer="sgd", epochs=200))
        assert trace.final_loss < 1e-6 < trace.loss[0]

    def test_moving_average_non_increasing(self):
        task = make_stream_mix(4, make_rng(11))
        trace = train(task, lambda r: init_params("go", 4, r, s=2), TrainConfig(lr=1e-3, epochs=1500))
        ma = np.convolve(trace.loss, np.ones(50) / 50, mode="valid")
        assert np.all(np.diff(ma) <= 1e-12)

    def test_non_finite_loss(self):
        class Bad:
            def loss_grad(self, H):
                return float("nan"), np.zeros_like(H)

        with pytest.raises(NonFiniteLoss):
            train(Bad(), init_params("lite", 2, make_rng(0)), TrainConfig(epochs=3))
