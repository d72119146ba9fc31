"""Deterministic derivation of per-unit random seeds from one master seed.

Every stochastic unit (advisor, bootstrap sample, CV fold, tuning
candidate, ...) receives ``derive_seed(master, key1, key2, ...)``. Keys may
be ints or strings; strings are mapped through CRC-32 so the result does
not depend on Python's randomized ``hash``. The derived seed depends only
on the keys, never on scheduling order.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, (bool, np.bool_)):
        return int(k)
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("seed keys must be non-negative")
        return int(k)
    return zlib.crc32(str(k).encode("utf-8"))


def derive_seed(master: int, *keys) -> int:
    seq = np.random.SeedSequence([_key(master), *(_key(k) for k in keys)])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def derive_rng(master: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
