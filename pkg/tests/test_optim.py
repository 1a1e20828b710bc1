import math

import numpy as np
import pytest

from arforge.optim import AdamState, LrSchedule, adam_step, learning_rate
from arforge.tensor import ShapeError, Tensor


def test_adam_constant_gradient_moves_by_lr_sign():
    # with a constant gradient the bias-corrected moments are g and g^2 at
    # every step, so each update is exactly lr * g / (|g| + eps)
    p = Tensor(np.zeros(4), requires_grad=True)
    g = np.array([1.0, -2.0, 0.5, -0.25])
    state = AdamState.init([p])
    lr = 0.01
    expected = np.zeros(4)
    for _ in range(5):
        state = adam_step([p], [g], state, lr)
        expected -= lr * g / (np.abs(g) + state.epsilon)
        assert np.allclose(p.values, expected, atol=1e-12)


def test_adam_two_steps_match_hand_recurrence():
    beta1, beta2, eps, lr = 0.9, 0.98, 1e-9, 0.1
    g1, g2 = 3.0, -1.0
    p = Tensor(np.array([0.5]), requires_grad=True)
    state = AdamState.init([p], beta1=beta1, beta2=beta2, epsilon=eps)
    adam_step([p], [np.array([g1])], state, lr)
    adam_step([p], [np.array([g2])], state, lr)

    # independent scalar recurrence
    m = (1 - beta1) * g1
    v = (1 - beta2) * g1 * g1
    x = 0.5 - lr * (m / (1 - beta1)) / (math.sqrt(v / (1 - beta2)) + eps)
    m = beta1 * m + (1 - beta1) * g2
    v = beta2 * v + (1 - beta2) * g2 * g2
    x -= lr * (m / (1 - beta1**2)) / (math.sqrt(v / (1 - beta2**2)) + eps)
    assert p.values[0] == pytest.approx(x, abs=1e-15)


def test_adam_zero_gradient_is_a_fixed_point():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    state = AdamState.init([p])
    adam_step([p], [np.zeros(2)], state, 0.5)
    assert np.array_equal(p.values, [1.0, 2.0])
    assert np.array_equal(state.first_moment[0], np.zeros(2))


def test_adam_step_counts_and_in_place_moments():
    p = Tensor(np.zeros(3), requires_grad=True)
    state = AdamState.init([p])
    m_ref = state.first_moment[0]
    adam_step([p], [np.ones(3)], state, 0.1)
    assert state.step == 1
    assert state.first_moment[0] is m_ref  # updated in place, not replaced


def test_adam_validation():
    p = Tensor(np.zeros(2), requires_grad=True)
    state = AdamState.init([p])
    with pytest.raises(ValueError):
        adam_step([p], [np.zeros(2)], state, 0.0)
    with pytest.raises(ShapeError):
        adam_step([p], [np.zeros(3)], state, 0.1)
    with pytest.raises(ValueError):
        AdamState.init([p], beta1=1.0)
    with pytest.raises(ValueError):
        AdamState.init([p], epsilon=0.0)


def test_learning_rate_peak_value_full_scale():
    # dim 512, warmup 4000: both branches meet at the warmup step and give
    # 512^-0.5 * 4000^-0.5 = 6.9877e-4
    schedule = LrSchedule(model_dim=512, warmup_steps=4000)
    peak = learning_rate(schedule, 4000)
    assert peak == pytest.approx(512**-0.5 * 4000**-0.5, rel=1e-12)
    assert peak == pytest.approx(6.9877e-4, abs=1e-7)


def test_learning_rate_desk_scale_peak():
    schedule = LrSchedule(model_dim=64, warmup_steps=400)
    assert learning_rate(schedule, 400) == pytest.approx(0.125 * 400**-0.5, rel=1e-12)


def test_learning_rate_linear_during_warmup():
    schedule = LrSchedule(model_dim=64, warmup_steps=400)
    lr100 = learning_rate(schedule, 100)
    lr200 = learning_rate(schedule, 200)
    assert lr200 == pytest.approx(2 * lr100, rel=1e-12)


def test_learning_rate_decays_after_warmup():
    schedule = LrSchedule(model_dim=64, warmup_steps=400)
    values = [learning_rate(schedule, s) for s in (400, 800, 1600)]
    assert values[0] > values[1] > values[2]
    assert values[2] == pytest.approx(values[0] / 2, rel=1e-12)


def test_learning_rate_rejects_bad_steps():
    schedule = LrSchedule(model_dim=64, warmup_steps=400)
    with pytest.raises(ValueError):
        learning_rate(schedule, 0)
    with pytest.raises(ValueError):
        learning_rate(schedule, 1.5)


def test_schedule_validation():
    with pytest.raises(ValueError):
        LrSchedule(model_dim=0, warmup_steps=400)
    with pytest.raises(ValueError):
        LrSchedule(model_dim=64, warmup_steps=0)
