"""Counter-based random streams keyed by (seed, purpose, indices).

Every random draw in the package goes through :func:`rng_for` so results do not
depend on evaluation order or on how work is split across processes.
"""
from __future__ import annotations

import zlib

import numpy as np


def _tag_code(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def seed_sequence(seed: int, tag: str, *indices: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _tag_code(tag), *(int(i) for i in indices)])


def rng_for(seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Philox generator for one (seed, tag, indices) stream."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, tag, *indices)))


def derive_seed(seed: int, tag: str, *indices: int) -> int:
    """A 63-bit integer seed for a child task."""
    state = seed_sequence(seed, tag, *indices).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def as_generator(seed: int | np.random.Generator, tag: str = "default") -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return rng_for(seed, tag)
