"""Named, reproducible PRNG streams.

Every stream is a function of a master seed plus an ordered tuple of keys
(strings or non-negative ints), so independent workers can rebuild the same
stream without sharing state::

    rng = stream(7, "stochastic_tp", 3)   # trajectory "stochastic_tp", agent 3
"""

from __future__ import annotations

import numpy as np

from .hashing import fnv1a_64


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return fnv1a_64(part)
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    raise TypeError(f"stream keys must be str or non-negative int, got {part!r}")


def seed_sequence(seed: int, *keys: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence([_key(seed), *(_key(k) for k in keys)])


def stream(seed: int, *keys: int | str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))
