"""Deterministic random numbers for reproducible experiments.

The generator is SplitMix64: state advances by the 64-bit golden-ratio
increment 0x9E3779B97F4A7C15 and each output mixes the state with two
xor-shift multiplications (constants 0xBF58476D1CE4E5B9 and
0x94D049BB133111EB, shifts 30/27/31).  Bounded draws use rejection below
the largest multiple of the bound, and permutations come from a
descending Fisher-Yates shuffle.  Everything here is integer arithmetic,
so any implementation of the same three routines reproduces the streams
bit for bit.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """64-bit seeded stream; seed is reduced mod 2^64."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_uint64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection: draws at or above the
        largest multiple of n are discarded, so no modulo bias."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_uint64()
            if x < limit:
                return x % n

    def permutation(self, n: int) -> tuple[int, ...]:
        """Uniform permutation of range(n): swap index i with a uniform
        j <= i, for i from n-1 down to 1."""
        a = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            a[i], a[j] = a[j], a[i]
        return tuple(a)


def spawn(seed: int, index: int) -> int:
    """Stable per-cell seed: hash the pair by running the generator from
    the parent seed xor a mixed index."""
    probe = SplitMix64((seed ^ ((index + 1) * _GAMMA)) & _MASK)
    return probe.next_uint64()
