"""Seeded random streams.

Every draw in the package comes from a :class:`numpy.random.Generator`
passed in explicitly.  Independent substreams are derived from a master
seed plus an integer key path via :class:`numpy.random.SeedSequence`,
which hashes ``(entropy, spawn_key)`` so that stream ``(seed, 7)`` is the
same no matter how many other streams exist or in what order they were
created.
"""

from __future__ import annotations

import numpy as np

RandomStream = np.random.Generator

_MAX_SEED = 2**64 - 1


def substream(master_seed: int, *key: int) -> RandomStream:
    """Return the generator for ``key`` under ``master_seed``."""
    if not 0 <= master_seed <= _MAX_SEED:
        raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
    if any(k < 0 for k in key):
        raise ValueError(f"substream keys must be non-negative, got {key}")
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def stream(seed: int) -> RandomStream:
    """Top-level generator for a plain integer seed."""
    return substream(seed)
