"""Seeded pseudorandom generator used wherever reproducibility is contractual.

Scene synthesis and k-means seeding must give bit-identical results across
runs and implementations, so they share this fixed generator instead of a
library RNG whose stream could change between versions.
"""

import math

_MASK64 = (1 << 64) - 1
_MULTIPLIER = 2685821657736338717
# Substitute state for the invalid all-zero seed (any fixed odd value works).
_ZERO_SEED_STATE = 0x9E3779B97F4A7C15


class Xorshift64Star:
    """xorshift64* generator.

    One step updates the 64-bit state with ``x ^= x >> 12``,
    ``x ^= x << 25``, ``x ^= x >> 27`` and outputs
    ``x * 2685821657736338717 mod 2**64``.  Doubles take the top 53 bits of
    the output, giving uniform values in [0, 1).  Gaussians come from the
    Box-Muller transform, consuming two doubles per pair and caching the
    second value.
    """

    def __init__(self, seed: int):
        state = seed & _MASK64
        self._state = state if state != 0 else _ZERO_SEED_STATE
        self._cached_gaussian = None

    def next_uint64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK64
        x ^= x >> 27
        self._state = x
        return (x * _MULTIPLIER) & _MASK64

    def next_double(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_uint64() >> 11) * 2.0 ** -53

    def next_index(self, n: int) -> int:
        """Uniform index in [0, n)."""
        i = int(self.next_double() * n)
        return i if i < n else n - 1

    def next_gaussian(self) -> float:
        """Standard normal deviate (Box-Muller)."""
        if self._cached_gaussian is not None:
            z = self._cached_gaussian
            self._cached_gaussian = None
            return z
        u1 = 1.0 - self.next_double()  # in (0, 1]: log stays finite
        u2 = self.next_double()
        radius = math.sqrt(-2.0 * math.log(u1))
        angle = 2.0 * math.pi * u2
        self._cached_gaussian = radius * math.sin(angle)
        return radius * math.cos(angle)
