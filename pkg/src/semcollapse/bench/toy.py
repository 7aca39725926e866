"""Deterministic desk-scale token model.

Scores over a fixed 64-token vocabulary are a pure function of the input text:

    scores = noise(hash64(text without marker)) + w * grammar_prior(answer so far)

``noise`` is a standard-normal vector seeded by that FNV-1a hash, and
``grammar_prior`` nudges toward the Central Context grammar (sentence
openers, sentence length, no pronouns). Without the context marker the prior
weight is small (``FREE_WEIGHT``). With the marker present the prior weight is
``BOUND_WEIGHT`` and the whole score vector is multiplied by ``CONCENTRATION``
before the softmax, which sharpens the distribution.
"""

from __future__ import annotations

import numpy as np

from ..hashing import fnv1a_64
from .context import CONTEXT_MARKER, sentences
from .metrics import words

CONCENTRATION = 3.0
FREE_WEIGHT = 0.4
BOUND_WEIGHT = 1.0

EOS = "<eos>"
THEREFORE = "Therefore,"
_TERMINATORS = (".", "!", "?")
_CONTENT = (
    "alignment model state anchor context entropy meaning agents system grammar "
    "signal token form order rule consensus collapse convergence structure dialect language path limit "
    "converges holds remains settles follows binds shrinks stays "
    "the a every each all one shared fixed stable final common single "
    "now thus toward under into with"
).split()
_PRONOUN_TOKENS = ("I", "we", "you", "it", "they", "he", "she", "our", "their", "my")

VOCAB: tuple[str, ...] = (EOS, THEREFORE, *_TERMINATORS, *_PRONOUN_TOKENS, *_CONTENT)

_INDEX = {tok: i for i, tok in enumerate(VOCAB)}
_PRONOUN_IDX = np.array([_INDEX[t] for t in _PRONOUN_TOKENS])
_TERM_IDX = np.array([_INDEX[t] for t in _TERMINATORS])
_CONTENT_IDX = np.array([_INDEX[t] for t in _CONTENT])
_ROUND0_TAIL = "Answer in two sentences."


def _answer_segment(text: str) -> str:
    seg = text.rsplit("\n", 1)[-1]
    if seg.startswith(_ROUND0_TAIL):
        seg = seg[len(_ROUND0_TAIL):]
    return seg


def grammar_prior(answer: str) -> np.ndarray:
    prior = np.zeros(len(VOCAB))
    prior[_PRONOUN_IDX] -= 2.0
    stripped = answer.rstrip()
    done = len(sentences(answer)) if stripped.endswith(_TERMINATORS) else max(0, len(sentences(answer)) - 1)
    at_start = not stripped or stripped.endswith(_TERMINATORS)
    current = sentences(answer)[-1] if not at_start and sentences(answer) else ""
    n_current = len(words(current))
    n_total = len(words(answer))
    if at_start:
        prior[_TERM_IDX] -= 3.0
        if done >= 2 or n_total > 20:
            prior[0] += 3.0
        else:
            prior[_INDEX[THEREFORE]] += 3.0
            prior[0] -= 3.0
    else:
        prior[_INDEX[THEREFORE]] -= 2.0
        if n_current >= 5 or n_total > 20:
            prior[_INDEX["."]] += 3.0
        else:
            prior[_CONTENT_IDX] += 0.5
            prior[_TERM_IDX] -= 2.0
            prior[0] -= 3.0
    return prior


class ToyModel:
    """Pure, shareable implementation of the token-model contract."""

    model_id = "toy-64"
    eos_id = 0
    vocab = VOCAB

    def __init__(self, marker: str = CONTEXT_MARKER):
        self.marker = marker

    def scores(self, text: str) -> np.ndarray:
        # the marker is stripped before hashing so a prompt with and without it shares its base scores
        base = text.replace(self.marker, "")
        noise = np.random.Generator(np.random.PCG64(fnv1a_64(base))).standard_normal(len(VOCAB))
        bound = self.marker in text
        s = noise + (BOUND_WEIGHT if bound else FREE_WEIGHT) * grammar_prior(_answer_segment(text))
        return CONCENTRATION * s if bound else s

    def next_distribution(self, text: str) -> np.ndarray:
        s = self.scores(text)
        w = np.exp(s - s.max())
        return w / w.sum()

    def token_piece(self, token: int) -> str:
        tok = VOCAB[token]
        if token == self.eos_id:
            return ""
        return tok if tok in _TERMINATORS else " " + tok

