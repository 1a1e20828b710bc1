"""Central finite-difference gradient checking."""

from __future__ import annotations

import math
from typing import Callable, Sequence

from .tensor import Tensor, backward, no_grad


def check_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    scale_floor: float = 1e-3,
) -> float:
    """Worst relative error between backward() and central finite differences.

    `fn` must map `params` to a scalar Tensor and be free of side effects;
    it is re-evaluated twice per parameter coordinate at x +- h.  Per
    coordinate the error is |analytic - numeric| / max(|analytic|,
    |numeric|, scale_floor); the floor stops float64 difference noise from
    dominating coordinates whose true gradient is ~0.  A non-finite
    function value or gradient reports as inf.
    """
    for p in params:
        if not p.requires_grad:
            raise ValueError("all checked parameters must require gradients")

    loss = fn(params)
    if not math.isfinite(loss.item()):
        return math.inf
    grad_map = backward(loss, params=params)

    worst = 0.0
    with no_grad():
        for p in params:
            analytic = grad_map[p].reshape(-1)
            flat = p.values.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + h
                hi = fn(params).item()
                flat[i] = original - h
                lo = fn(params).item()
                flat[i] = original
                if not (math.isfinite(hi) and math.isfinite(lo)):
                    return math.inf
                numeric = (hi - lo) / (2.0 * h)
                denom = max(abs(analytic[i]), abs(numeric), scale_floor)
                worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
