"""Seed derivation for every stochastic operation.

All randomness in the package flows from an explicit 64-bit seed. Child
streams are keyed by labels (strings or integers) so that, e.g., the draw for
patient 17 does not depend on how many patients came before it:

    state = seed
    for label in labels:
        state = splitmix64(state ^ blake2b_64(label))

``splitmix64`` is the finalizer from Steele, Lea & Flood (2014)::

    z = state + 0x9E3779B97F4A7C15          (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB (mod 2**64)
    z = z ^ (z >> 31)

The derived 64-bit value seeds a numpy ``PCG64`` bit generator, which is
bit-stable across platforms for a fixed numpy version.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    z = (state + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _label_hash(label: str | int) -> int:
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, *labels: str | int) -> int:
    state = splitmix64(int(seed) & MASK64)
    for label in labels:
        state = splitmix64(state ^ _label_hash(label))
    return state


def make_rng(seed: int, *labels: str | int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *labels)))
