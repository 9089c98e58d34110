"""Keyed random streams.

Every random draw in the package comes from a Philox generator keyed by the
master seed plus a tuple of labels, so a stream depends only on what it is
for and never on how many draws happened before it.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_word(label) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        return int(label) & _MASK64
    digest = hashlib.blake2b(repr(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for ``(seed, *labels)``."""
    seq = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(_key_word(v) for v in labels))
    return np.random.Generator(np.random.Philox(seq))


def permutation(n: int, seed: int, *labels) -> np.ndarray:
    return stream(seed, *labels).permutation(n)
