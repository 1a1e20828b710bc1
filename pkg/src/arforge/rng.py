"""Deterministic 64-bit pseudo-random numbers (splitmix64).

Every random choice in the package (parameter init, dropout, shuffling,
subsampling, toy data generation) draws from this generator so that runs
are reproducible bit for bit from a single master seed.  Distinct stages
derive their own seed with `derive_seed(master, label)`, so adding a new
stage never perturbs the streams of existing ones.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """splitmix64 finalizer: bijective avalanche mix of a 64-bit value."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, label: str) -> int:
    """Stable sub-seed for a named stage: mix64(master ^ fnv1a64(label))."""
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return mix64((master_seed & _MASK64) ^ h)


class SplitMix64:
    """splitmix64 stream: state advances by the golden gamma, outputs are mixed.

    The k-th output after seeding with s0 equals mix64(s0 + k * gamma), which
    is what `next_u64_array` exploits to generate blocks with numpy uint64
    arithmetic; the scalar and vector paths produce identical streams.
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def next_u64_array(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError(f"need n >= 0, got {n}")
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self._state) + steps * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GOLDEN) & _MASK64
        return z

    def next_float(self) -> float:
        # 53 high bits -> uniform double in [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53

    def next_floats(self, n: int) -> np.ndarray:
        return (self.next_u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform(self, low: float, high: float, shape: Sequence[int]) -> np.ndarray:
        size = int(np.prod(shape, dtype=np.int64)) if len(shape) else 1
        out = low + self.next_floats(size) * (high - low)
        return out.reshape(shape)

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) via the multiply-shift reduction."""
        if bound <= 0:
            raise ValueError(f"need bound > 0, got {bound}")
        return (self.next_u64() * bound) >> 64

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, population: int, k: int) -> list[int]:
        """k distinct indices from range(population), returned in ascending order."""
        if not 0 <= k <= population:
            raise ValueError(f"need 0 <= k <= {population}, got {k}")
        pool = list(range(population))
        for i in range(k):
            j = i + self.next_below(population - i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:k])
