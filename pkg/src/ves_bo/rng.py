"""Counter-based, splittable random streams.

Every stream is a Philox generator keyed by ``(seed_base, repeat, purpose,
*extra)``.  The purpose is a short string hashed with CRC-32, so a new
consumer of randomness gets its own stream without shifting anyone else's.
"""

from __future__ import annotations

import zlib

import numpy as np


def purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed_base: int, repeat: int, purpose: str, *extra: int) -> np.random.Generator:
    """Independent generator for one ``(seed_base, repeat, purpose, extra)`` key."""
    words = [int(seed_base) & 0xFFFFFFFF, int(seed_base) >> 32 & 0xFFFFFFFF,
             int(repeat), purpose_key(purpose), *(int(e) for e in extra)]
    if any(w < 0 for w in words):
        raise ValueError("stream keys must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def stream_seed(seed_base: int, repeat: int, purpose: str, *extra: int) -> int:
    """A 63-bit integer seed drawn from the keyed stream, for APIs that take plain ints."""
    return int(stream(seed_base, repeat, purpose, *extra).integers(0, 2 ** 63 - 1))
