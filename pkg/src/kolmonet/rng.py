"""Reproducible random streams.

Every stream is a Philox (counter-based) generator seeded from
``SeedSequence(seed, spawn_key=key)``.  Key components may be ints, floats or
strings; non-integers are mapped to 32-bit words through CRC32 of their
``repr``, so the same ``(seed, key)`` always yields the same stream no matter
how work is partitioned across processes.
"""

from __future__ import annotations

import zlib

import numpy as np

# namespaces keep oracle noise disjoint from construction noise
BUILD = "build"
ORACLE = "oracle"
EVAL = "eval"
VERIFY = "verify"


def _word(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    return zlib.crc32(repr(part).encode())


def stream(seed: int, *key) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_word(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
