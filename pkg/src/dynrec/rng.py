"""Named random streams derived from a single run seed.

Every source of randomness in a run (embedding init, negative sampling,
prompt-edge sampling, random gating, ...) draws from its own generator, keyed
by a stable stream name plus an optional index (e.g. the snapshot number).
Toggling one component therefore never shifts the random numbers another
component sees.
"""

from __future__ import annotations

import zlib

import numpy as np


def seed_stream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Return the generator for stream `name`/`index` of the given run seed."""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key, index)))
