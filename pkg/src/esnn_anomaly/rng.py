"""Seeded random draws with purpose-split substreams.

SplitMix64 drives everything: 64-bit state, one output per step, trivially
portable across platforms and releases. A master seed fans out into numbered
substreams (one per draw purpose), so adding or removing draws of one kind
never shifts the values another kind sees. Normal variates come from the
Box-Muller transform with the usual cached second value.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64

__all__ = ["CANDIDATE_STREAM", "WARMUP_STREAM", "SplitStream"]

# Substream indices used by the detector.
WARMUP_STREAM = 0
CANDIDATE_STREAM = 1

_MASK64 = (1 << 64) - 1


@njit(cache=True)
def _next_u64(state):
    """Advance one SplitMix64 step; state is a one-element uint64 array."""
    state[0] = state[0] + uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(cache=True)
def _uniform(state):
    # top 53 bits -> [0, 1)
    return (_next_u64(state) >> uint64(11)) * 1.1102230246251565e-16


@njit(cache=True)
def _normal(state, cache, mean, scale):
    """One normal variate; scale is the standard deviation, 0 degenerates to mean."""
    if cache[1] != 0.0:
        z = cache[0]
        cache[1] = 0.0
    else:
        u1 = 1.0 - _uniform(state)  # (0, 1], keeps the log finite
        u2 = _uniform(state)
        r = math.sqrt(-2.0 * math.log(u1))
        z = r * math.cos(2.0 * math.pi * u2)
        cache[0] = r * math.sin(2.0 * math.pi * u2)
        cache[1] = 1.0
    return mean + scale * z


@njit(cache=True)
def _substream_state(seed, index):
    st = np.empty(1, dtype=np.uint64)
    st[0] = seed
    out = uint64(0)
    for _ in range(index + 1):
        out = _next_u64(st)
    return out


class SplitStream:
    """One independent deterministic draw stream.

    Streams built from the same (seed, purpose) pair replay the same values
    forever; different purposes under the same seed are unrelated. The
    initial state of substream k is the k-th output of a SplitMix64 sequence
    seeded with the master seed.
    """

    __slots__ = ("_state", "_cache")

    def __init__(self, seed: int, purpose: int = 0):
        if not 0 <= int(seed) <= _MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if purpose < 0:
            raise ValueError("purpose must be non-negative")
        self._state = np.empty(1, dtype=np.uint64)
        self._state[0] = _substream_state(np.uint64(seed), purpose)
        self._cache = np.zeros(2, dtype=np.float64)

    def uniform(self) -> float:
        """Next value in [0, 1)."""
        return float(_uniform(self._state))

    def normal(self, mean: float, scale: float) -> float:
        """Next normal variate with the given mean and standard deviation."""
        if scale < 0.0:
            raise ValueError("scale must be non-negative")
        return float(_normal(self._state, self._cache, mean, scale))

    @property
    def state(self) -> tuple[int, float, bool]:
        """Snapshot of (raw state, cached variate, cache armed), for tests."""
        return int(self._state[0]), float(self._cache[0]), bool(self._cache[1])
