"""Seedable 64-bit PRNG (splitmix64).

Every randomized stage in the package draws from this generator so that
runs are reproducible from a single integer seed and ports to other
languages can match the streams bit for bit.  The update rule is the
standard splitmix64 finalizer:

    state  <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z      <- state
    z      <- (z xor (z >> 30)) * 0xBF58476D1CE4E5B9   mod 2^64
    z      <- (z xor (z >> 27)) * 0x94D049BB133111EB   mod 2^64
    output <- z xor (z >> 31)

Bounded draws use plain modulo reduction (`next() % n`); the tiny modulo
bias is irrelevant for sampling work and keeps ports trivial.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def splitmix64_nth(seed: int, n: int) -> int:
    """The n-th output (n >= 1) of a splitmix64 stream, in O(1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _mix((seed + n * _GOLDEN) & _MASK)


class SplitMix64:
    """Sequential splitmix64 stream."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def below(self, n: int) -> int:
        """Uniform-ish integer in [0, n) via modulo reduction."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next() % n
