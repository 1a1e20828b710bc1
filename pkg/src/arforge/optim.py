"""Adam with bias correction and the inverse-square-root warmup schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor


@dataclass
class AdamState:
    """Optimizer moments, one pair of arrays per parameter, plus the step count."""

    step: int
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-9

    @classmethod
    def init(cls, params: Sequence[Tensor], beta1: float = 0.9, beta2: float = 0.98,
             epsilon: float = 1e-9) -> "AdamState":
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        if epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        return cls(
            step=0,
            first_moment=[np.zeros_like(p.values) for p in params],
            second_moment=[np.zeros_like(p.values) for p in params],
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray],
              state: AdamState, lr: float) -> AdamState:
    """One Adam update, in place on the parameter values.

    m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2, both bias-corrected by
    1 - b^t; update = lr * m_hat / (sqrt(v_hat) + eps).  A zero gradient
    leaves the parameter and its moments exactly unchanged.
    """
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ValueError(
            f"got {len(params)} params, {len(grads)} grads, "
            f"{len(state.first_moment)} moment slots")
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if g.shape != p.values.shape:
            raise ShapeError("adam_step", g.shape, p.values.shape)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.values -= lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    state.step = t
    return state


@dataclass(frozen=True)
class LrSchedule:
    """Inverse-square-root decay with linear warmup, scaled by model width."""

    model_dim: int
    warmup_steps: int

    def __post_init__(self):
        if self.model_dim < 1:
            raise ValueError(f"model_dim must be >= 1, got {self.model_dim}")
        if self.warmup_steps < 1:
            raise ValueError(f"warmup_steps must be >= 1, got {self.warmup_steps}")


def learning_rate(schedule: LrSchedule, step: int) -> float:
    """lr = dim^-0.5 * min(step^-0.5, step * warmup^-1.5); peak at step == warmup."""
    if not isinstance(step, (int, np.integer)) or step < 1:
        raise ValueError(f"step must be an integer >= 1, got {step!r}")
    dim_term = schedule.model_dim**-0.5
    return dim_term * min(step**-0.5, step * schedule.warmup_steps**-1.5)
