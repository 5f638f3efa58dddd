"""Seed derivation and the in-kernel generator.

Two generators are used:

* environments and other array-level sampling use numpy's ``Philox``
  (a counter-based 64-bit generator) keyed through ``SeedSequence``;
* walk kernels compiled with numba use SplitMix64, one independent stream
  per path.  The stream of path ``i`` under master seed ``s`` is
  ``path_state(s, i)`` and depends on nothing else, so any single path of a
  batch can be replayed on its own.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & _MASK64, *[int(k) & _MASK64 for k in keys]])


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(seed, *keys)``."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)[0])


def generator(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator for the substream ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *keys)))


@njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def path_state(master, index):
    """Initial SplitMix64 state of path ``index`` under ``master``."""
    return mix64(mix64(np.uint64(master)) ^ mix64(np.uint64(index) + np.uint64(_GOLDEN)))


@njit(cache=True)
def next_uniform(state):
    """Advance ``state`` (length-1 uint64 array); return a uniform in (0, 1]."""
    state[0] = state[0] + np.uint64(_GOLDEN)
    z = mix64(state[0])
    return (float(z >> np.uint64(11)) + 1.0) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def next_normal(state):
    u1 = next_uniform(state)
    u2 = next_uniform(state)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True)
def next_gamma(state, shape):
    """Gamma(shape, 1) for integer-valued ``shape >= 1``."""
    if shape < 16:
        acc = 0.0
        for _ in range(int(shape)):
            acc -= np.log(next_uniform(state))
        return acc
    # Marsaglia-Tsang
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    while True:
        x = next_normal(state)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = next_uniform(state)
        if np.log(u) < 0.5 * x * x + d - d * v + d * np.log(v):
            return d * v


def master_u64(seed: int) -> np.uint64:
    return np.uint64(derive_seed(seed, 0x5EED))
