"""Decoding: nucleus sampling and generation with boundary-distribution capture."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ..errors import BackendError, InputError
from .metrics import as_prob_vector

# Boundary distributions are always reported at this temperature.
REPORT_TEMPERATURE = 1.0


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "greedy"
    temperature: float = 0.0
    top_p: float = 1.0
    top_k: int = 0

    def __post_init__(self):
        if self.mode not in ("greedy", "stochastic"):
            raise InputError(f"mode must be 'greedy' or 'stochastic', got {self.mode!r}")
        if self.mode == "greedy" and self.temperature != 0:
            raise InputError("greedy decoding requires temperature = 0")
        if self.mode == "stochastic" and not (math.isfinite(self.temperature) and self.temperature > 0):
            raise InputError("stochastic decoding requires temperature > 0")
        if not 0 < self.top_p <= 1:
            raise InputError(f"top_p must lie in (0, 1], got {self.top_p!r}")
        if int(self.top_k) != self.top_k or self.top_k < 0:
            raise InputError(f"top_k must be an integer >= 0, got {self.top_k!r}")

    @classmethod
    def greedy(cls) -> "DecodeConfig":
        return cls()

    @classmethod
    def stochastic(cls, temperature: float = 0.7, top_p: float = 0.9, top_k: int = 40) -> "DecodeConfig":
        return cls("stochastic", temperature, top_p, top_k)


def nucleus(p, p0: float, k: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Token indices of the nucleus (probability-sorted) and their renormalised masses."""
    p = as_prob_vector(p)
    if not 0 < p0 <= 1:
        raise InputError(f"p0 must lie in (0, 1], got {p0!r}")
    if k < 0:
        raise InputError(f"k must be >= 0, got {k!r}")
    order = np.argsort(-p, kind="stable")
    if k > 0:
        order = order[:k]
    cum = np.cumsum(p[order])
    # first prefix whose mass reaches p0; the whole (truncated) list if none does
    hit = np.flatnonzero(cum >= p0)
    size = int(hit[0]) + 1 if hit.size else order.size
    keep = order[:size]
    mass = p[keep]
    return keep, mass / mass.sum()


def top_p_sample(p, p0: float, k: int, rng: np.random.Generator) -> int:
    idx, probs = nucleus(p, p0, k)
    u = rng.random()
    j = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return int(idx[min(j, idx.size - 1)])


def tempered(p, temperature: float) -> np.ndarray:
    """Re-temper a temperature-1 distribution: ``softmax(log p / T)``."""
    p = np.asarray(p, dtype=float)
    if temperature == 1.0:
        return p
    with np.errstate(divide="ignore"):
        logits = np.log(p) / temperature
    logits -= logits[np.isfinite(logits)].max()
    w = np.exp(logits)
    return w / w.sum()


@runtime_checkable
class TokenModel(Protocol):
    """A local next-token model.

    ``next_distribution(text)`` returns the temperature-1 distribution after
    ingesting ``text``; advancing the state means appending ``token_piece(tok)``
    to the text. It must be deterministic in ``text``.
    """

    model_id: str
    eos_id: int

    def next_distribution(self, text: str) -> np.ndarray: ...

    def token_piece(self, token: int) -> str: ...


def select_token(p: np.ndarray, cfg: DecodeConfig, rng: np.random.Generator | None) -> int:
    if cfg.mode == "greedy":
        return int(np.argmax(p))
    if rng is None:
        raise InputError("stochastic decoding needs an rng")
    return top_p_sample(tempered(p, cfg.temperature), cfg.top_p, cfg.top_k, rng)


def generate_pieces(
    model: TokenModel, prompt: str, cfg: DecodeConfig, max_tokens: int, rng: np.random.Generator | None = None
) -> tuple[list[str], np.ndarray]:
    if max_tokens < 0:
        raise InputError(f"max_tokens must be >= 0, got {max_tokens}")
    boundary = as_prob_vector(model.next_distribution(prompt))
    pieces: list[str] = []
    text, p = prompt, boundary
    for _ in range(max_tokens):
        tok = select_token(p, cfg, rng)
        if tok == model.eos_id:
            break
        piece = model.token_piece(tok)
        pieces.append(piece)
        text += piece
        p = model.next_distribution(text)
    return pieces, boundary


def generate_with_probs(
    model, prompt: str, cfg: DecodeConfig, max_tokens: int, rng: np.random.Generator | None = None
) -> tuple[str, np.ndarray]:
    """Generate up to ``max_tokens`` tokens and return ``(trimmed text, boundary distribution)``.

    ``model`` is either a local :class:`TokenModel` or a remote backend exposing
    ``generate(prompt, cfg, max_tokens, seed)``.
    """
    if hasattr(model, "generate"):
        seed = int(rng.integers(2**63)) if rng is not None else 0
        return model.generate(prompt, cfg, max_tokens, seed)
    try:
        pieces, boundary = generate_pieces(model, prompt, cfg, max_tokens, rng)
    except (OSError, BackendError) as exc:
        raise BackendError(f"{getattr(model, 'model_id', model)!s} failed on prompt {prompt[:40]!r}: {exc}") from exc
    return "".join(pieces).strip(), boundary
