"""Seeded random streams.

Every stream is a PCG64 generator keyed by ``(seed, purpose, round, client)``.
The purpose tag is hashed with CRC32 so stream identities are stable across
platforms and Python versions. Two streams share state only if all four parts
of their key match.
"""

from __future__ import annotations

import zlib

import numpy as np

# purposes used by the package; anything else is accepted but listing them here
# keeps the stream audit honest
PURPOSES = (
    "data",
    "split",
    "partition",
    "dp",
    "init",
    "select",
    "shuffle",
)


def purpose_id(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream_key(seed: int, purpose: str, round_: int = 0, client: int = 0) -> tuple[int, int, int, int]:
    if seed < 0 or round_ < 0 or client < 0:
        raise ValueError("stream key components must be non-negative")
    return (int(seed) & 0xFFFFFFFFFFFFFFFF, purpose_id(purpose), int(round_), int(client))


def make_rng(seed: int, purpose: str, round_: int = 0, client: int = 0) -> np.random.Generator:
    """Return the generator for one ``(seed, purpose, round, client)`` stream."""
    ss = np.random.SeedSequence(list(stream_key(seed, purpose, round_, client)))
    return np.random.Generator(np.random.PCG64(ss))
