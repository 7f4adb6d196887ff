"""Deterministic seed derivation via splittable seed-sequence keys.

Every nested random decision (per tree, per fold, per view, per model) gets
its seed from (parent seed, structured key), so results never depend on
execution order or thread count.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = 2**64 - 1
_MASK32 = 2**32 - 1


def seed_sequence(seed, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(int(k) & _MASK32 for k in key),
    )


def child_seed(seed, *key) -> int:
    """A 64-bit child seed for the given derivation key."""
    hi, lo = seed_sequence(seed, *key).generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)


def spawn_rng(seed, *key) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *key))


def name_key(name: str) -> int:
    """Stable 32-bit key for a string (model names in seed derivations)."""
    return zlib.crc32(name.encode("utf-8"))
