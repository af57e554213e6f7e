"""Stable seed derivation. Never uses Python's per-process randomized ``hash()``."""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _words(parts) -> list[int]:
    out = []
    for p in parts:
        if isinstance(p, str):
            out.append(zlib.crc32(p.encode("utf-8")))
        else:
            v = int(p) & _MASK64
            out.extend([v & 0xFFFFFFFF, v >> 32])
    return out


def derive_seed(*parts) -> int:
    """64-bit seed mixed from integers and string tags."""
    lo, hi = np.random.SeedSequence(_words(parts)).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def make_rng(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_words(parts))))
