"""Named RNG sub-streams derived from a single run seed.

Every random draw in a run flows from one integer seed through a named
stream (mobility, shadowing, phase, per-vehicle MAC), so module-level
parallelism cannot reorder draws and identical (config, seed) pairs give
bit-identical results.
"""
from __future__ import annotations

import zlib

import numpy as np


def stream_key(*path: int | str) -> tuple[int, ...]:
    """Encode a mixed str/int path as a spawn key (strings via CRC32)."""
    key = []
    for part in path:
        if isinstance(part, str):
            key.append(zlib.crc32(part.encode("utf-8")))
        else:
            key.append(int(part))
    return tuple(key)


def substream(seed: int, *path: int | str) -> np.random.Generator:
    """Generator for the sub-stream named by `path` under `seed`."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=stream_key(*path))
    return np.random.default_rng(ss)
