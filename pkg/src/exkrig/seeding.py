"""Seed derivation: one base seed plus string role tags gives independent,
reproducible streams.

Scheme: each tag is hashed with crc32 and appended to the base seed to
form the entropy of a ``numpy.random.SeedSequence``.  The same
(seed, tags) pair therefore always yields the same stream, and distinct
tags yield statistically independent streams.
"""

import zlib

import numpy as np


def seed_sequence(seed: int, *tags: str) -> np.random.SeedSequence:
    entropy = [int(seed)] + [zlib.crc32(t.encode("utf-8")) for t in tags]
    return np.random.SeedSequence(entropy)


def rng_from(seed: int, *tags: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *tags)))


def derived_seed(seed: int, *tags: str) -> int:
    """A plain integer seed derived from (seed, tags), for APIs that take
    an integer rather than a Generator."""
    return int(seed_sequence(seed, *tags).generate_state(1)[0])
