"""Deterministic RNG substreams for replicated computations.

Bootstrap replicates and Monte Carlo replicates each draw from their own
PCG64 stream, seeded by mixing the master seed with the replicate index.
Results then depend only on (master_seed, index), never on scheduling
order or worker count.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One output of the SplitMix64 sequence started at state ``x``."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def substream_seed(master_seed: int, *path: int) -> int:
    """Mix ``path`` indices into ``master_seed``, one SplitMix64 step per level."""
    h = splitmix64(master_seed & _MASK64)
    for index in path:
        h = splitmix64(h ^ ((index + 0x9E3779B97F4A7C15) & _MASK64))
    return h


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for one replicate, independent of all other replicates."""
    return np.random.Generator(np.random.PCG64(substream_seed(master_seed, *path)))
