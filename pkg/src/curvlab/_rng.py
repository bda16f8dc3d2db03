"""Deterministic, named random streams derived from one integer seed."""

from __future__ import annotations

import zlib

import numpy as np


def _key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def rng_for(seed: int, *names: str) -> np.random.Generator:
    """Independent generator for the stream ``names`` under ``seed``.

    Streams with different names never share state, so adding a consumer
    does not shift the numbers drawn by another.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.default_rng(ss)
