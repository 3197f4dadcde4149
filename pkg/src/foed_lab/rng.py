"""Counter-based uniform generator with a fixed, documented bit stream.

The i-th output (i = 0, 1, ...) of a generator with seed ``s`` is

    z = s + (i + 1) * 0x9E3779B97F4A7C15            (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9        (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB        (mod 2**64)
    z = z ^ (z >> 31)
    u = ((z >> 11) + 0.5) / 2**53

i.e. the SplitMix64 finaliser applied to a Weyl sequence.  Every value is
a pure function of (seed, i), so any range of counters can be generated
independently and results do not depend on the platform or on how the
work is split.  Uniforms lie strictly inside (0, 1).
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def splitmix64(seed: int, counters: np.ndarray) -> np.ndarray:
    """Raw 64-bit outputs for the given counters (uint64 array)."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK) + (c + np.uint64(1)) * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms_at(seed: int, counters: np.ndarray) -> np.ndarray:
    bits = splitmix64(seed, counters) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


class CounterRNG:
    """Stream view of the counter generator.

    ``uniforms(n)`` returns the next ``n`` values and advances the position;
    ``at(offset)`` gives an independent view starting at another counter.
    """

    def __init__(self, seed: int, position: int = 0):
        if position < 0:
            raise ValueError("position must be nonnegative")
        self.seed = int(seed) & _MASK
        self.position = int(position)

    def uniforms(self, n: int) -> np.ndarray:
        out = uniforms_at(self.seed, np.arange(self.position, self.position + n, dtype=np.uint64))
        self.position += n
        return out

    def at(self, position: int) -> "CounterRNG":
        return CounterRNG(self.seed, position)
