"""Deterministic seed derivation for reproducible (and parallel) Monte-Carlo.

Every random quantity in the package draws from a numpy PCG64 generator whose
seed is derived from the user's master seed with `derive`. The mixing function
is splitmix64, fixed across versions, so replication r always sees the same
stream no matter how many workers run or in which order they finish.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

# Stream tags. Values are part of the reproducibility contract: do not renumber.
TAG_REPLICATION = 1
TAG_ADJACENCY = 2
TAG_GROUPS = 3
TAG_PANEL = 4


def splitmix64(z: int) -> int:
    """One splitmix64 output step (Steele, Lea, Flood 2014)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive(seed: int, *parts: int) -> int:
    """Derive a child seed from `seed` and a path of integer parts.

    derive(s) == s mod 2^64; each extra part folds in one splitmix64 round,
    so derive(s, a, b) != derive(s, b, a) in general.
    """
    z = seed & _MASK64
    for p in parts:
        z = splitmix64(z ^ splitmix64(p & _MASK64))
    return z


def generator(seed: int, *parts: int) -> np.random.Generator:
    """PCG64 generator for the derived stream."""
    return np.random.Generator(np.random.PCG64(derive(seed, *parts)))
