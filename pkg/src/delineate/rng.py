"""Portable xorshift64* generator so fixtures reproduce across implementations.

State update (all arithmetic modulo 2**64)::

    x ^= x >> 12
    x ^= x << 25
    x ^= x >> 27
    out = x * 0x2545F4914F6CDD1D

The initial state is ``splitmix64(seed)``; a zero result is replaced by
``0x9E3779B97F4A7C15``.  Doubles are ``(out >> 11) * 2**-53``.
"""

from __future__ import annotations

import math

import numba
import numpy as np

MASK64 = (1 << 64) - 1
MULT = 0x2545F4914F6CDD1D
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(seed: int) -> int:
    z = (seed + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@numba.njit(cache=True)
def _fill(state, n):
    out = np.empty(n, dtype=np.float64)
    x = np.uint64(state)
    for i in range(n):
        x ^= x >> np.uint64(12)
        x ^= x << np.uint64(25)
        x ^= x >> np.uint64(27)
        v = x * np.uint64(MULT)
        out[i] = np.float64(v >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return out, x


class XorShift64Star:
    def __init__(self, seed: int):
        self.state = splitmix64(seed & MASK64) or GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * MULT) & MASK64

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        return min(int(self.random() * n), n - 1)

    def normal(self) -> float:
        # Box-Muller, first variate only
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def random_array(self, n: int) -> np.ndarray:
        """``n`` consecutive draws of :meth:`random`, vectorised."""
        out, state = _fill(np.uint64(self.state), n)
        self.state = int(state)
        return out

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
