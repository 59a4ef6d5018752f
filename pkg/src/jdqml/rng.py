"""Seed derivation and generator construction.

Every random stream comes from numpy's Philox4x64 counter-based generator
keyed by a 64-bit integer.  Independent streams for replications, cells and
burn-in runs are obtained by folding integer labels into the base seed with
the splitmix64 finaliser, so a stream depends only on its labels and never on
execution order.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1

BURN_IN_STREAM = 0xB0B1
PATH_STREAM = 0x7A7E


def splitmix64(x: int) -> int:
    """One splitmix64 step: advance by the golden gamma, then finalise."""
    z = (int(x) + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(base: int, *labels: int) -> int:
    """Fold ``labels`` into ``base``: s <- splitmix64(s xor label)."""
    s = splitmix64(int(base) & _MASK)
    for label in labels:
        s = splitmix64(s ^ (int(label) & _MASK))
    return s


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK))
