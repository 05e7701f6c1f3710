"""Counter-based 64-bit random streams (SplitMix64 finaliser).

Draw ``k`` of a stream with key ``K`` is ``mix64(K + (k + 1) * GAMMA)``; keys
are derived from a seed and a path of integers, so any stream (say, the one
for instance 1234) can be produced without touching the others.  All
arithmetic is modulo 2**64.

    GAMMA = 0x9E3779B97F4A7C15
    mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
              z ^= z >> 27; z *= 0x94D049BB133111EB
              z ^= z >> 31

Uniforms use the top 53 bits, ``(u >> 11) + 0.5) * 2**-53``, which lies in
the open interval (0, 1).  Normals come from Box-Muller (cosine branch only,
two uniforms per normal); Gumbel draws use the inverse CDF.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


def derive_key(seed: int, *path: int) -> int:
    key = int(mix64(np.array([seed & _MASK], dtype=np.uint64))[0])
    for p in path:
        z = (key ^ ((int(p) + 1) * int(GAMMA))) & _MASK
        key = int(mix64(np.array([z], dtype=np.uint64))[0])
    return key


class CounterRNG:
    """Sequential view onto one counter-based stream."""

    def __init__(self, seed: int, *path: int):
        self.key = derive_key(seed, *path)
        self.counter = 0

    def raw(self, size: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + 1 + size, dtype=np.uint64)
        self.counter += size
        with np.errstate(over="ignore"):
            return mix64(np.uint64(self.key) + idx * GAMMA)

    def uniform(self, low=0.0, high=1.0, size=()):
        n = int(np.prod(size, dtype=np.int64))
        u = ((self.raw(n) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return (low + (high - low) * u).reshape(size)

    def normal(self, size=()):
        n = int(np.prod(size, dtype=np.int64))
        u1 = self.uniform(size=(n,))
        u2 = self.uniform(size=(n,))
        return (np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)).reshape(size)

    def bernoulli(self, p=0.5, size=()):
        return (self.uniform(size=size) < p).astype(np.float64)

    def gumbel(self, loc=0.0, scale=1.0, size=()):
        u = self.uniform(size=size)
        return loc - scale * np.log(-np.log(u))

    def permutation(self, n: int) -> np.ndarray:
        # Stable argsort of uniforms; ties are impossible in practice and broken by index.
        return np.argsort(self.uniform(size=(n,)), kind="stable")


# Stream tags (first element of a derive_key path).
STREAM_STRUCTURE = 1
STREAM_INSTANCE = 2
STREAM_SPLIT = 3
STREAM_FIXED = 4
STREAM_INIT = 5
STREAM_SHUFFLE = 6
