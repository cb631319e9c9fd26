"""Seeded random streams on a counter-based generator.

All stochastic code in the toolkit draws from numpy's Philox bit generator
(Philox4x64-10, Salmon et al. 2011): counter-based, 64-bit, identical output
for identical keys on every platform.  Streams are domain-separated by
hashing the user seed together with string tags through a splitmix64 mix,
so e.g. the fog plasma field and the snow layer of the same image never
share a stream even under the same seed.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def mix64(*parts: int) -> int:
    """Combine integers into one 64-bit value via splitmix64 finalizers.

    Reference: Steele, Lea, Flood, "Fast splittable pseudorandom number
    generators" (the SplitMix64 finalizer).  Order-sensitive: mix64(a, b)
    differs from mix64(b, a).
    """
    acc = 0x9E3779B97F4A7C15
    for part in parts:
        acc = (acc ^ (int(part) & _MASK64)) * 0xBF58476D1CE4E5B9 & _MASK64
        acc = (acc ^ (acc >> 27)) * 0x94D049BB133111EB & _MASK64
        acc = acc ^ (acc >> 31)
    return acc


def _tag_to_int(tag) -> int:
    if isinstance(tag, str):
        # FNV-1a over the UTF-8 bytes; cheap, stable, documented.
        h = 0xCBF29CE484222325
        for b in tag.encode("utf-8"):
            h = ((h ^ b) * 0x100000001B3) & _MASK64
        return h
    return int(tag) & _MASK64


def stream(seed: int, *tags) -> np.random.Generator:
    """Return a Generator on an independent Philox stream.

    The stream key is (seed, mix of tags); identical arguments always yield
    an identical stream.  Tags may be ints or strings.
    """
    key = np.array(
        [mix64(seed), mix64(seed, *(_tag_to_int(t) for t in tags))],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(base_seed: int, index: int) -> int:
    """Per-item seed for batch flows, e.g. image index within a dataset."""
    return mix64(base_seed, index)
