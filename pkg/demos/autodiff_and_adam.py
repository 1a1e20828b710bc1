"""Fit a tiny two-layer regression head with the reverse-mode tensor core.

Walks through the pieces the translation models are built from: Tensor
graphs, backward(), a finite-difference gradient check, and Adam with the
inverse-square-root warmup schedule.
"""

import numpy as np

from arforge.gradcheck import check_gradients
from arforge.optim import AdamState, LrSchedule, adam_step, learning_rate
from arforge.rng import SplitMix64
from arforge.tensor import Tensor, add, backward, matmul, mul, relu, scale


def make_data(n=256, seed=11):
    # y = sin(3x) + 0.5x, x in [-1, 1]
    rng = SplitMix64(seed)
    x = np.array(rng.next_floats(n)) * 2.0 - 1.0
    y = np.sin(3.0 * x) + 0.5 * x
    return x[:, None], y[:, None]


def init_params(hidden=16, seed=7):
    rng = np.random.default_rng(seed)
    w1 = Tensor(rng.normal(0, 0.5, size=(1, hidden)), requires_grad=True)
    # bias away from zero: finite differences are noisy right at the relu kink
    b1 = Tensor(np.full(hidden, 0.2), requires_grad=True)
    w2 = Tensor(rng.normal(0, 0.5, size=(hidden, 1)), requires_grad=True)
    b2 = Tensor(np.zeros(1), requires_grad=True)
    return [w1, b1, w2, b2]


def mse(params, x, y):
    w1, b1, w2, b2 = params
    hidden = relu(add(matmul(Tensor(x), w1), b1))
    pred = add(matmul(hidden, w2), b2)
    err = add(pred, scale(Tensor(y), -1.0))
    return scale(mul(err, err).sum(), 1.0 / x.shape[0])


def main():
    x, y = make_data()
    params = init_params()

    # 1. the graph differentiates correctly (same checker the test suite uses)
    small_x, small_y = x[:8], y[:8]
    err = check_gradients(lambda ps: mse(ps, small_x, small_y), params)
    print(f"gradient check, worst relative error: {err:.2e}")

    # 2. warmup then inverse-sqrt decay, the transformer training schedule
    sched = LrSchedule(model_dim=16, warmup_steps=100)
    for step in (1, 50, 100, 200, 400):
        print(f"  lr at step {step:>3}: {learning_rate(sched, step):.5f}")

    # 3. optimize
    state = AdamState.init(params)
    for step in range(1, 401):
        loss = mse(params, x, y)
        grads = backward(loss, params=params)
        adam_step(params, [grads[p] for p in params], state,
                  learning_rate(sched, step))
        if step % 100 == 0 or step == 1:
            print(f"step {step:>3}  mse {loss.item():.4f}")

    final = mse(params, x, y).item()
    print(f"final mse {final:.4f} (started near 2.7)")
    assert final < 0.05


if __name__ == "__main__":
    main()
