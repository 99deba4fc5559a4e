"""Deterministic random streams shared by every stochastic component.

All randomness is drawn from numpy's Philox bit generator, a counter-based
64-bit generator with a documented stream (Philox4x64-10, keyed by the
64-bit seed).  Child streams are derived with a SplitMix64 hash of
``(seed, index)`` so that independent components (Monte Carlo replicates,
forest trees, data splits) never share a stream and can be reproduced in
isolation.  The same derivation rule is recorded in every run manifest.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One SplitMix64 mixing step of a 64-bit state."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def child_seed(seed: int, index: int) -> int:
    """Derive the child stream seed: splitmix64(splitmix64(seed) XOR splitmix64(index + 1))."""
    return splitmix64(splitmix64(seed & _MASK64) ^ splitmix64((index + 1) & _MASK64))


def make_rng(seed: int) -> np.random.Generator:
    """Philox4x64-10 generator keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
