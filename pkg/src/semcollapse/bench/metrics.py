"""Per-round benchmark metrics over next-token distributions and output texts."""

from __future__ import annotations

import math
import re
from typing import Iterable, Sequence

import numpy as np

from ..errors import InputError
from ..hashing import fnv1a_64

PROB_TOL = 1e-9

# A word is a run of letters/digits, apostrophes and hyphens containing at least one letter or digit.
_WORD = re.compile(r"(?:[^\W_]|['-])*[^\W_](?:[^\W_]|['-])*")


def as_prob_vector(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InputError("probability vector must be 1-D and non-empty")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InputError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise InputError(f"probabilities must sum to 1 within {PROB_TOL} (got {p.sum():.12g})")
    return p


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p, q = as_prob_vector(p), as_prob_vector(q)
    if p.shape != q.shape:
        raise InputError(f"distributions differ in length: {p.size} vs {q.size}")
    return p, q


def shannon_entropy(p) -> float:
    p = as_prob_vector(p)
    nz = p[p > 0]
    return float(max(0.0, -np.sum(nz * np.log(nz))))


def top1(p) -> float:
    return float(np.max(as_prob_vector(p)))


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats; ``inf`` when p puts mass where q has none."""
    p, q = _pair(p, q)
    m = p > 0
    if np.any(q[m] == 0):
        return math.inf
    return float(max(0.0, np.sum(p[m] * np.log(p[m] / q[m]))))


def fisher_rao(p, q) -> float:
    """``2 arccos <sqrt p, sqrt q>``, the great-circle distance of the Hellinger embedding."""
    p, q = _pair(p, q)
    bc = float(np.sum(np.sqrt(p * q)))
    return 2.0 * math.acos(min(1.0, max(0.0, bc)))


def words(text: str) -> list[str]:
    return _WORD.findall(text)


def jaccard_similarity(a: str, b: str) -> float:
    wa = {w.lower() for w in words(a)}
    wb = {w.lower() for w in words(b)}
    if not wa and not wb:
        return 1.0
    return len(wa & wb) / len(wa | wb)


def hash64(text: str) -> int:
    return fnv1a_64(text)


def collision_rate(finals: Sequence[str]) -> float:
    if len(finals) == 0:
        raise InputError("collision rate needs at least one final text")
    unique = len({hash64(t) for t in finals})
    return 1.0 - unique / len(finals)


def unique_count(texts: Iterable[str]) -> int:
    return len({hash64(t) for t in texts})
