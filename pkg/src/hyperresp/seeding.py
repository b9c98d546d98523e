"""Seed derivation shared by every randomized routine.

A child seed is ``splitmix64(seed ^ splitmix64(index + 1))``.  Batch runs
(Monte Carlo resamples, protocol repetitions, grid points) draw run ``k``
from ``numpy.random.default_rng(derive_seed(seed, k))`` so results do not
depend on execution order.
"""

from __future__ import annotations

import secrets

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, index: int) -> int:
    return splitmix64((seed & MASK64) ^ splitmix64(index + 1))


def fresh_seed() -> int:
    return secrets.randbits(64)


def rng_for(seed: int | np.random.Generator | None, index: int | None = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = fresh_seed()
    if index is not None:
        seed = derive_seed(seed, index)
    return np.random.default_rng(seed & MASK64)
