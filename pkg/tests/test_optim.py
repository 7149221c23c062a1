"""Tests for padambench optimizers, averaging schedules and channel selection."""

import math

import numpy as np
import pytest

import padambench
from padambench import optim
from padambench.nn import Batch
from padambench.optim import AdamState, ChannelKind, ChannelSpec, HyperParams, PadamState
from padambench.problems import QuadraticProblem


def reference_adam(theta0, grads, alpha, beta, eps, lr):
    """
    Straight-line Adam process, written out coordinate by coordinate.

    m_n = alpha m_{n-1} + (1 - alpha) g_n
    v_n = beta v_{n-1} + (1 - beta) g_n^2
    theta_n = theta_{n-1} - lr [eps + (v_n / (1 - prod beta))^(1/2)]^(-1) m_n / (1 - prod alpha)
    """
    theta = [float(x) for x in theta0]
    m = [0.0 for _ in theta]
    v = [0.0 for _ in theta]
    prod_alpha = 1.0
    prod_beta = 1.0
    history = []
    for g in grads:
        prod_alpha *= alpha
        prod_beta *= beta
        for i in range(len(theta)):
            m[i] = alpha * m[i] + (1.0 - alpha) * float(g[i])
            v[i] = beta * v[i] + (1.0 - beta) * float(g[i]) ** 2
            denominator = eps + math.sqrt(v[i] / (1.0 - prod_beta))
            theta[i] = theta[i] - lr * (m[i] / (1.0 - prod_alpha)) / denominator
        history.append(list(theta))
    return history


def _run_adam(theta, grads, hp):
    state = AdamState.initial(len(theta))
    history = []
    for g in grads:
        state, theta = padambench.adam_step(state, theta, g, hp)
        history.append(theta)
    return state, history


class TestHyperParams:
    """Tests for hyperparameter validation."""

    def test_defaults(self):
        hp = HyperParams()
        assert (hp.alpha, hp.beta, hp.eps, hp.momentum, hp.weight_decay) == (0.9, 0.999, 1e-8, 0.9, 0.01)

    @pytest.mark.parametrize(
        "kwargs",
        [{"alpha": 1.0}, {"beta": 1.0}, {"beta": -0.1}, {"eps": 0.0}, {"lr": 0.0},
         {"momentum": 1.5}, {"weight_decay": -1.0}, {"lr": math.inf}],
    )
    def test_out_of_range(self, kwargs):
        with pytest.raises(padambench.InvalidHyperParameterError):
            HyperParams(**kwargs)


class TestSgd:
    """Tests for plain and momentum SGD."""

    def test_zero_gradient(self):
        assert padambench.sgd_step(np.ones(2), np.zeros(2), HyperParams()).tolist() == [1.0, 1.0]

    def test_hand_example(self):
        out = padambench.sgd_step(np.array([1.0, 0.0]), np.array([2.0, -2.0]), HyperParams(lr=0.1))
        np.testing.assert_allclose(out, [0.8, 0.2], rtol=0, atol=1e-15)

    def test_two_steps_linear(self):
        hp = HyperParams(lr=0.1)
        g = np.array([1.0, -3.0])
        out = padambench.sgd_step(padambench.sgd_step(np.zeros(2), g, hp), g, hp)
        np.testing.assert_allclose(out, -2 * 0.1 * g)

    def test_length_mismatch(self):
        with pytest.raises(padambench.ShapeError):
            padambench.sgd_step(np.zeros(2), np.zeros(3), HyperParams())

    def test_non_finite_gradient(self):
        with pytest.raises(padambench.NonFiniteError):
            padambench.sgd_step(np.zeros(2), np.array([0.0, math.nan]), HyperParams())

    def test_momentum_zero_is_sgd(self):
        hp = HyperParams(lr=0.05, momentum=0.0)
        params, grad = np.array([1.0, 2.0]), np.array([0.5, -1.0])
        _, out = padambench.momentum_sgd_step(np.zeros(2), params, grad, hp)
        assert np.array_equal(out, padambench.sgd_step(params, grad, hp))

    def test_momentum_fixed_point(self):
        velocity, params = np.zeros(3), np.array([1.0, -1.0, 2.0])
        for _ in range(10):
            velocity, params = padambench.momentum_sgd_step(velocity, params, np.zeros(3), HyperParams())
        assert params.tolist() == [1.0, -1.0, 2.0]

    def test_momentum_two_steps(self):
        hp = HyperParams(lr=1.0, momentum=0.9)
        g = np.array([1.0])
        velocity, params = padambench.momentum_sgd_step(np.zeros(1), np.zeros(1), g, hp)
        velocity, params = padambench.momentum_sgd_step(velocity, params, g, hp)
        assert params[0] == pytest.approx(-2.9)


class TestAdam:
    """Tests for the Adam recursion."""

    def test_zero_gradient_first_step(self):
        _, out = padambench.adam_step(AdamState.initial(2), np.ones(2), np.zeros(2), HyperParams())
        assert out.tolist() == [1.0, 1.0]

    def test_first_step_hand_evaluation(self):
        hp = HyperParams(alpha=0.9, beta=0.999, lr=0.01, eps=1e-8)
        _, out = padambench.adam_step(AdamState.initial(1), np.zeros(1), np.array([2.0]), hp)
        assert out[0] == pytest.approx(-0.01 * 2.0 / (1e-8 + 2.0), rel=1e-12)

    def test_sign_sgd_limit(self):
        hp = HyperParams(alpha=0.0, beta=0.0, lr=0.1)
        g = np.array([3.0, -0.5, 1e-3])
        _, out = padambench.adam_step(AdamState.initial(3), np.zeros(3), g, hp)
        np.testing.assert_allclose(out, -0.1 * g / (1e-8 + np.abs(g)), rtol=1e-15)

    def test_matches_straight_line_reference(self):
        stream = padambench.derive_stream(100, 0)
        hp = HyperParams(lr=0.01)
        theta0 = stream.standard_normal(size=7)
        grads = stream.standard_normal(size=(100, 7)) * 3.0
        _, history = _run_adam(theta0, grads, hp)
        expected = reference_adam(theta0, grads, hp.alpha, hp.beta, hp.eps, hp.lr)
        for got, want in zip(history, expected):
            assert np.max(np.abs(got - np.array(want))) <= 1e-12

    def test_eps_outside_square_root(self):
        # v_hat = eps^2 makes eps + sqrt(v_hat) = 2 eps but sqrt(v_hat + eps) ~ 1e-4
        eps = 1e-8
        hp = HyperParams(lr=1.0, eps=eps)
        _, out = padambench.adam_step(AdamState.initial(1), np.zeros(1), np.array([eps]), hp)
        outside = -eps / (eps + eps)
        inside = -eps / math.sqrt(eps * eps + eps)
        assert out[0] == pytest.approx(outside, rel=1e-12)
        assert abs(outside - inside) / abs(outside) > 1e-3

    def test_decay_products_telescope(self):
        hp = HyperParams(alpha=0.8, beta=0.95)
        grads = padambench.derive_stream(101, 0).standard_normal(size=(50, 2))
        state, _ = _run_adam(np.zeros(2), grads, hp)
        assert state.n == 50
        assert abs(state.prod_alpha - 0.8 ** 50) < 1e-12
        assert abs(state.prod_beta - 0.95 ** 50) < 1e-12

    def test_second_moment_nonnegative(self):
        state = AdamState.initial(4)
        params = np.zeros(4)
        stream = padambench.derive_stream(102, 0)
        for _ in range(200):
            state, params = padambench.adam_step(state, params, stream.standard_normal(size=4), HyperParams())
            assert np.all(state.v >= 0.0)

    def test_state_length_mismatch(self):
        with pytest.raises(padambench.ShapeError):
            padambench.adam_step(AdamState.initial(3), np.zeros(2), np.zeros(2), HyperParams())

    def test_non_finite_gradient_carries_step(self):
        state, params = padambench.adam_step(AdamState.initial(1), np.zeros(1), np.ones(1), HyperParams())
        with pytest.raises(padambench.NonFiniteError) as excinfo:
            padambench.adam_step(state, params, np.array([math.inf]), HyperParams())
        assert excinfo.value.step == 2


class TestAdamW:
    """Tests for decoupled weight decay."""

    def test_zero_decay_equals_adam(self):
        hp = HyperParams(weight_decay=0.0, lr=0.01)
        params, grad = np.array([0.3, -1.2]), np.array([0.7, 0.1])
        _, adam = padambench.adam_step(AdamState.initial(2), params, grad, hp)
        _, adamw = padambench.adamw_step(AdamState.initial(2), params, grad, hp)
        assert np.array_equal(adam, adamw)

    def test_pure_decay(self):
        hp = HyperParams(weight_decay=0.01, lr=0.01)
        _, out = padambench.adamw_step(AdamState.initial(1), np.ones(1), np.zeros(1), hp)
        assert out[0] == pytest.approx(0.9999, rel=1e-15)

    def test_decay_is_decoupled(self):
        hp = HyperParams(weight_decay=0.1, lr=0.01)
        params, grad = np.array([2.0]), np.array([0.5])
        _, decoupled = padambench.adamw_step(AdamState.initial(1), params, grad, hp)
        _, adam = padambench.adam_step(AdamState.initial(1), params, grad, hp)
        _, coupled = padambench.adam_step(AdamState.initial(1), params, grad + 0.1 * params, hp)
        assert decoupled[0] == pytest.approx(adam[0] - 0.01 * 0.1 * 2.0, rel=1e-15)
        assert abs(decoupled[0] - coupled[0]) > 1e-6


class TestSchedules:
    """Tests for averaging-weight schedules."""

    HORIZON = 20_000

    def test_padam3_constant(self):
        specs = padambench.padam3_channels(self.HORIZON)
        assert padambench.schedule_delta(specs[0], 1234) == 0.999

    def test_padam3_polynomial_first_step(self):
        specs = padambench.padam3_channels(self.HORIZON)
        assert padambench.schedule_delta(specs[1], 1) == 0.0

    def test_padam3_exponential_last_step(self):
        specs = padambench.padam3_channels(self.HORIZON)
        assert padambench.schedule_delta(specs[2], self.HORIZON) == pytest.approx(0.999, abs=1e-15)

    def test_padam10_layout(self):
        specs = padambench.padam10_channels(self.HORIZON)
        assert len(specs) == 10
        assert [s.kind for s in specs[:2]] == [ChannelKind.CONSTANT] * 2
        assert [s.rate for s in specs[2:6]] == [0.6, 0.7, 0.8, 0.7]
        assert specs[5].c == 0.5
        assert [(s.c, s.rate) for s in specs[6:]] == [(0.1, 2.0), (0.01, 1.0), (0.1, 3.0), (0.1, 5.0)]

    @pytest.mark.parametrize("n_fraction", [0.0, 0.5, 1.0])
    def test_closed_forms_for_all_published_channels(self, n_fraction):
        N = self.HORIZON
        n = max(1, int(N * n_fraction))
        specs = padambench.padam3_channels(N) + padambench.padam10_channels(N)
        assert len(specs) == 13
        for spec in specs:
            if spec.kind is ChannelKind.CONSTANT:
                expected = spec.c
            elif spec.kind is ChannelKind.POLYNOMIAL_GAP:
                expected = 1.0 - spec.c / n ** spec.rate
            else:
                expected = 1.0 - spec.c * 10.0 ** (-spec.rate * n / N)
            delta = padambench.schedule_delta(spec, n)
            assert abs(delta - expected) <= 1e-15
            assert 0.0 <= delta < 1.0

    def test_channel6_printed_form_leaves_domain(self):
        with pytest.raises(padambench.ScheduleDomainError) as excinfo:
            ChannelSpec(ChannelKind.POLYNOMIAL_GAP, 0.5, rate=-0.7, horizon=self.HORIZON)
        assert excinfo.value.n == 3

    def test_channel6_literal_flag_clamps(self):
        specs = padambench.padam10_channels(self.HORIZON, channel6_literal=True)
        channel6 = specs[5]
        assert padambench.schedule_delta(channel6, 1) == 0.5
        assert padambench.schedule_delta(channel6, 2) == pytest.approx(1.0 - 0.5 * 2 ** 0.7)
        assert padambench.schedule_delta(channel6, 3) == 0.0
        assert padambench.schedule_delta(channel6, self.HORIZON) == 0.0

    def test_n_outside_horizon(self):
        spec = padambench.padam3_channels(100)[0]
        with pytest.raises(padambench.InvalidRangeError):
            padambench.schedule_delta(spec, 0)
        with pytest.raises(padambench.InvalidRangeError):
            padambench.schedule_delta(spec, 101)

    def test_exponential_needs_horizon(self):
        with pytest.raises(padambench.InvalidRangeError):
            padambench.schedule_delta(optim.exp_decay_gap(0.1, 2.0), 5)

    def test_constant_one_rejected(self):
        with pytest.raises(padambench.ScheduleDomainError):
            optim.constant(1.0).bind(10)

    def test_from_dict(self):
        spec = ChannelSpec.from_dict({"kind": "polynomial_gap", "c": 1, "p": 0.6}, horizon=50)
        assert spec == optim.polynomial_gap(1.0, 0.6).bind(50)
        assert spec.to_dict() == {"kind": "polynomial_gap", "c": 1.0, "p": 0.6}


class TestEmaAndSelection:
    """Tests for ema_update and select_channel."""

    def test_delta_zero_returns_current(self):
        assert optim.ema_update(np.array([2.0]), np.array([4.0]), 0.0).tolist() == [4.0]

    def test_delta_one_freezes(self):
        assert optim.ema_update(np.array([2.0]), np.array([4.0]), 1.0).tolist() == [2.0]

    def test_half(self):
        assert optim.ema_update(np.array([2.0]), np.array([4.0]), 0.5).tolist() == [3.0]

    def test_delta_out_of_range(self):
        with pytest.raises(padambench.InvalidRangeError):
            optim.ema_update(np.zeros(1), np.zeros(1), 1.5)

    def test_argmin(self):
        assert padambench.select_channel([3.0, 1.0, 2.0]) == 2

    def test_tie_break_lowest_index(self):
        assert padambench.select_channel([1.5, 1.5, 1.5]) == 1
        assert padambench.select_channel([2.0, 0.25, 0.25]) == 2

    def test_nan_excluded(self):
        assert padambench.select_channel([math.nan, 5.0]) == 2

    def test_all_non_finite(self):
        with pytest.raises(padambench.SelectionError):
            padambench.select_channel([math.nan, math.inf])

    def test_scale_invariance(self):
        losses = [0.7, 0.3, 0.9, 0.3]
        assert padambench.select_channel([4.0 * x for x in losses]) == padambench.select_channel(losses)


class _RowTagObjective:
    """Loss of a sub-batch is the index of its first sample row."""

    def sample_batch(self, stream, size):
        return Batch(np.arange(size, dtype=np.float64)[:, None], np.zeros((size, 1)))

    def loss(self, params, batch):
        return float(batch.inputs[0, 0])


class TestPadam:
    """Tests for PADAM state, steps and selection."""

    def test_initial_channels_equal_params(self):
        params = np.array([1.0, -2.0])
        state = PadamState.initial(params, padambench.padam3_channels(10))
        assert all(np.array_equal(c, params) for c in state.channels)
        assert state.best_index == 1 and state.n == 0

    def test_needs_a_channel(self):
        with pytest.raises(padambench.ShapeError):
            PadamState.initial(np.zeros(2), [])

    def test_single_constant_step(self):
        hp = HyperParams(lr=0.01)
        theta0 = np.array([1.0, 2.0])
        grad = np.array([0.5, -0.5])
        state = padambench.padam_step(PadamState.initial(theta0, [optim.constant(0.999).bind(5)]), grad, hp)
        _, theta1 = padambench.adam_step(AdamState.initial(2), theta0, grad, hp)
        np.testing.assert_array_equal(state.raw, theta1)
        np.testing.assert_allclose(state.channels[0], 0.999 * theta0 + 0.001 * theta1, rtol=1e-15)

    def test_identical_specs_identical_channels(self):
        spec = optim.polynomial_gap(1.0, 0.7).bind(300)
        state = PadamState.initial(np.ones(3), [spec, spec])
        stream = padambench.derive_stream(5, 1)
        for _ in range(300):
            state = padambench.padam_step(state, stream.standard_normal(size=3), HyperParams())
            assert np.array_equal(state.channels[0], state.channels[1])

    @pytest.mark.parametrize("seed", range(5))
    def test_raw_trajectory_equals_adam(self, seed):
        problem = QuadraticProblem(dim=10)
        hp = HyperParams(lr=0.01)
        steps = 2000
        theta = problem.init_params(padambench.derive_stream(seed, 0))
        specs = [optim.constant(0.0).bind(steps), *padambench.padam3_channels(steps)]
        state = PadamState.initial(theta, specs)
        adam = AdamState.initial(10)
        stream_a = padambench.derive_stream(seed, 1)
        stream_b = padambench.derive_stream(seed, 1)
        for _ in range(steps):
            grad_a = problem.grad(state.raw, problem.sample_batch(stream_a, 32))
            grad_b = problem.grad(theta, problem.sample_batch(stream_b, 32))
            state = padambench.padam_step(state, grad_a, hp)
            adam, theta = padambench.adam_step(adam, theta, grad_b, hp)
        assert np.array_equal(state.raw, theta)
        assert np.array_equal(state.channels[0], theta)

    def test_channels_stay_in_raw_bounding_box(self):
        stream = padambench.derive_stream(7, 1)
        state = PadamState.initial(np.zeros(4), padambench.padam10_channels(500))
        low, high = state.raw.copy(), state.raw.copy()
        for _ in range(500):
            state = padambench.padam_step(state, stream.standard_normal(size=4), HyperParams(lr=0.05))
            low, high = np.minimum(low, state.raw), np.maximum(high, state.raw)
            for channel in state.channels:
                assert np.all(channel >= low - 1e-12) and np.all(channel <= high + 1e-12)

    def test_channel_losses_use_disjoint_rows(self):
        state = PadamState.initial(np.zeros(1), padambench.padam3_channels(10))
        losses = optim.channel_losses(state, _RowTagObjective(), padambench.derive_stream(1, 2), 4)
        assert losses == [0.0, 4.0, 8.0]

    def test_single_channel_always_selected(self):
        problem = QuadraticProblem(dim=3)
        state = PadamState.initial(np.ones(3), padambench.adam_ema_channels(10))
        state = padambench.evaluate_and_select(state, problem, padambench.derive_stream(1, 2), 16)
        assert state.best_index == 1
        assert len(state.channel_losses) == 1

    def test_identical_channels_scored_on_disjoint_batches(self):
        problem = QuadraticProblem(dim=10)
        specs = padambench.padam3_channels(10)[:2]
        state = PadamState.initial(np.ones(10), specs)
        for trial in range(20):
            selected = padambench.evaluate_and_select(state, problem, padambench.derive_stream(trial, 2), 256)
            losses = selected.channel_losses
            assert losses[0] != losses[1]
            # loss per sample has mean 20 and standard deviation sqrt(60)
            assert losses[selected.best_index - 1] <= losses[2 - selected.best_index]
            assert abs(losses[0] - losses[1]) < 4.0
            assert selected.best_index == (1 if losses[0] <= losses[1] else 2)

    def test_planted_channel_selected(self):
        problem = QuadraticProblem(dim=10)
        optimum = np.zeros(10)
        displaced = [2.0 * np.eye(10)[0], -2.0 * np.eye(10)[1]]
        specs = padambench.padam3_channels(10)
        state = PadamState(
            adam=AdamState.initial(10),
            raw=optimum,
            channels=(displaced[0], optimum, displaced[1]),
            specs=tuple(specs),
        )
        for trial in range(100):
            selected = padambench.evaluate_and_select(state, problem, padambench.derive_stream(trial, 2), 256)
            assert selected.best_index == 2

    def test_final_selection_returns_copy(self):
        problem = QuadraticProblem(dim=2)
        state = PadamState(
            adam=AdamState.initial(2),
            raw=np.zeros(2),
            channels=(np.array([5.0, 5.0]), np.zeros(2)),
            specs=tuple(padambench.padam3_channels(10)[:2]),
        )
        index, iterate = padambench.final_selection(state, problem, padambench.derive_stream(0, 2), 64)
        assert index == 2
        iterate[0] = 1.0
        assert state.channels[1][0] == 0.0
