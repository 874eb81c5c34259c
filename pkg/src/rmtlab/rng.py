"""Seed handling.

Every Monte Carlo loop draws sample ``k`` from its own stream, derived from
the master seed and the sample index. The derivation is numpy's
``SeedSequence(entropy=master, spawn_key=(k, stream))``, keeping the first
64-bit word of ``generate_state(1, uint64)``; that integer is what gets
stored on each sample. ``stream`` separates independent draws for the same
sample (e.g. the Wigner matrix and its Gaussian OU component). Serial and parallel runs
therefore see identical streams.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {seed!r}")
    value = int(seed)
    if value < 0 or value > MASK64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {value}")
    return value


def derive_seed(master: int, index: int, stream: int = 0) -> int:
    """64-bit seed of sample ``index`` (optionally a sub-``stream``) of a run."""
    ss = np.random.SeedSequence(entropy=check_seed(master), spawn_key=(int(index), int(stream)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(check_seed(seed))


def sample_rng(master: int, index: int, stream: int = 0) -> np.random.Generator:
    return make_rng(derive_seed(master, index, stream))
