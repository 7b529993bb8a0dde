"""Counter-based randomness.

Per-request and per-instance draws must not depend on call order, so they are
derived by hashing ``(seed, stream, index)`` with splitmix64 instead of
advancing a shared generator.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _mix(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def hash64(seed: int, stream: int, index: int) -> int:
    return _mix(_mix(_mix(seed & _MASK) ^ (stream & _MASK)) ^ (index & _MASK))


def uniform(seed: int, stream: int, index: int) -> float:
    """Uniform in [0, 1) with 53 random bits."""
    return (hash64(seed, stream, index) >> 11) * (1.0 / (1 << 53))


def choice(seed: int, stream: int, index: int, n: int) -> int:
    return int(uniform(seed, stream, index) * n)


def generator(seed: int, *counters: int) -> np.random.Generator:
    """Independent numpy generator for a (seed, counters...) stream."""
    return np.random.default_rng([seed & _MASK, *counters])


# stream ids
STREAM_RANDOM_BASELINE = 1
STREAM_ARM = 2
STREAM_RANDOM_ARM = 3
STREAM_REQUEST = 4
STREAM_CLICKS = 5
STREAM_DROP_DOC = 6
