"""Portable seeded random streams.

Every random draw in a run comes from a named substream derived from one
64-bit master seed:

    substream_seed = splitmix64_mix(master_seed XOR fnv1a64(utf8(name)))

A substream is a plain SplitMix64 sequence: the state starts at the derived
seed, each draw adds the golden-ratio increment and returns the mixed state.
Doubles use the top 53 bits, permutations are a stable argsort of fresh 64-bit
keys. Nothing here depends on a library bit generator, so the same seed gives
the same draws on any platform or in any language that follows these rules.
"""

from __future__ import annotations

import numpy as np
from scipy.special import betaincinv

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TWO_POW_M53 = 2.0 ** -53


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & MASK64
    return h


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def derive_seed(master_seed: int, name: str) -> int:
    return mix64((master_seed & MASK64) ^ fnv1a64(name.encode("utf-8")))


class Stream:
    """A SplitMix64 sequence. Scalar and block draws share one counter."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._count = 0

    def next_u64(self) -> int:
        self._count += 1
        return mix64(self.seed + self._count * GOLDEN_GAMMA)

    def u64_block(self, k: int) -> np.ndarray:
        if k <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(self._count + 1, self._count + k + 1, dtype=np.uint64)
        self._count += k
        with np.errstate(over="ignore"):
            state = np.uint64(self.seed) + steps * np.uint64(GOLDEN_GAMMA)
            return _mix64_array(state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * _TWO_POW_M53

    def random_block(self, k: int) -> np.ndarray:
        return (self.u64_block(k) >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53

    def below(self, high: int) -> int:
        """Uniform integer in [0, high); floor(u * high), bias below 2^-53 * high."""
        if high <= 0:
            raise ValueError("high must be positive")
        return int(self.random() * high)

    def below_block(self, high: int, k: int) -> np.ndarray:
        if high <= 0:
            raise ValueError("high must be positive")
        return (self.random_block(k) * high).astype(np.int64)

    def permutation(self, k: int) -> np.ndarray:
        keys = self.u64_block(k)
        return np.argsort(keys, kind="stable")

    def uniform_block(self, low: float, high: float, k: int) -> np.ndarray:
        return low + (high - low) * self.random_block(k)

    def beta_block(self, a: float, b: float, k: int) -> np.ndarray:
        # inverse-CDF sampling keeps one uniform per draw
        return betaincinv(a, b, self.random_block(k))


class SeedTree:
    """Hands out named substreams of one master seed and records the names."""

    def __init__(self, master_seed: int):
        if not 0 <= master_seed <= MASK64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {master_seed}")
        self.master_seed = master_seed
        self.names: list[str] = []

    def stream(self, name: str) -> Stream:
        if name not in self.names:
            self.names.append(name)
        return Stream(derive_seed(self.master_seed, name))
