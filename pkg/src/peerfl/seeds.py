"""Named random streams derived from the run seed.

Every random draw in a simulation comes from a stream derived here, so a run
is a pure function of (config, seed).  Streams are keyed by string tags; the
engine uses the following tags (oracles can re-derive the exact generators):

    ("data",)               synthetic dataset generation
    ("partition",)          shard assignment
    ("positions",)          initial device positions (wireless mode)
    ("mobility",)           waypoint draws
    ("gossip",)             gossip peer selection
    ("channel",)            stochastic packet loss
    ("adversary", i)        per-device poisoning noise
    ("init",)               common model init (centralized mode)
    ("init", i)             per-device model init (p2p mode)
    ("train", i, r)         device i's minibatch shuffles in round r
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK = (1 << 63) - 1


def _entropy(seed: int, tags: tuple) -> list[int]:
    parts = [seed & _MASK]
    for tag in tags:
        if isinstance(tag, int):
            parts.append(tag & _MASK)
        else:
            parts.append(zlib.crc32(str(tag).encode("utf-8")))
    return parts


def substream(seed: int, *tags) -> np.random.Generator:
    """Independent generator for the given seed and tag path."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(seed, tags)))


def derive_seed(seed: int, *tags) -> int:
    """Integer seed for APIs that take a seed rather than a generator."""
    state = np.random.SeedSequence(_entropy(seed, tags)).generate_state(1, np.uint64)
    return int(state[0]) & _MASK


def normalize_seed(seed: int) -> int:
    """Map an arbitrary integer (possibly negative) to a valid RNG seed."""
    return seed & _MASK
