"""The Central Context: anchor prompt, its checklist, and round prompts.

Compliance is the fraction of four checks a text passes:

1. exactly two sentences,
2. every sentence starts with ``"Therefore,"`` (a text with no sentences fails),
3. at most ``word_limit`` words,
4. no blocklisted pronoun as a whole word (case-insensitive).

Sentences are split after ``.``, ``!`` or ``?`` when followed by whitespace or
end of text; empty pieces are dropped. Words come from
:func:`semcollapse.bench.metrics.words`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import InputError
from .metrics import words

CONTEXT_MARKER = "[CENTRAL CONTEXT]"

PRONOUNS = frozenset(
    "i me my mine we us our ours you your yours he him his she her hers it its they them their theirs".split()
)

DEFAULT_CONTEXT_PROMPT = (
    f"{CONTEXT_MARKER}\n"
    "Topic: how one fixed shared context aligns every agent.\n"
    'Rules: exactly two sentences; each sentence starts with "Therefore,"; '
    "present tense; no personal pronouns; at most 24 words in total.\n"
)
DEFAULT_QUERY = "Explain how separate agents come to share one meaning."
ANCHOR_SUFFIX = "Produce the compliant answer."

DEFAULT_DIALECTS = (
    "terse",
    "formal",
    "poetic",
    "legalistic",
    "casual",
    "technical",
    "archaic",
    "journalistic",
    "academic",
    "playful",
    "bureaucratic",
    "minimalist",
    "verbose",
    "socratic",
    "telegraphic",
    "lyrical",
)

CHECK_NAMES = ("two_sentences", "therefore_prefix", "word_limit", "no_pronouns")

_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")


@dataclass(frozen=True)
class CentralContext:
    prompt: str = DEFAULT_CONTEXT_PROMPT
    word_limit: int = 24
    prefix: str = "Therefore,"
    sentence_count: int = 2
    pronouns: frozenset[str] = field(default=PRONOUNS)


def dialects(n: int, base=DEFAULT_DIALECTS) -> tuple[str, ...]:
    """``n`` dialect initializers; cycles through ``base`` with a numeric suffix once exhausted."""
    out = []
    for i in range(n):
        name = base[i % len(base)]
        out.append(name if i < len(base) else f"{name}-{i // len(base) + 1}")
    return tuple(out)


def sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_END.split(text) if s.strip()]


def compliance_checks(text: str, ctx: CentralContext = CentralContext()) -> tuple[bool, bool, bool, bool]:
    sents = sentences(text)
    ws = words(text)
    return (
        len(sents) == ctx.sentence_count,
        bool(sents) and all(s.startswith(ctx.prefix) for s in sents),
        len(ws) <= ctx.word_limit,
        not any(w.lower() in ctx.pronouns for w in ws),
    )


def compliance_score(text: str, ctx: CentralContext = CentralContext()) -> float:
    checks = compliance_checks(text, ctx)
    return sum(checks) / len(checks)


def build_prompt(r: int, dialect: str, previous: str, context: str, query: str) -> str:
    if r < 0:
        raise InputError(f"round must be >= 0, got {r}")
    if r == 0:
        return "Local Dialect: " + dialect + "\nTask: " + query + "\nAnswer in two sentences."
    return (
        context
        + "\nRewrite TEXT to comply; preserve meaning if possible; prioritize compliance.\nTEXT:\n"
        + previous
        + "\nREWRITE:\n"
    )


def anchor_prompt(context: str) -> str:
    return context + ANCHOR_SUFFIX
