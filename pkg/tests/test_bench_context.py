import pytest

from semcollapse.bench.context import (
    ANCHOR_SUFFIX,
    CONTEXT_MARKER,
    DEFAULT_CONTEXT_PROMPT,
    CentralContext,
    anchor_prompt,
    build_prompt,
    compliance_checks,
    compliance_score,
    dialects,
    sentences,
)
from semcollapse.errors import InputError

# Hand-scored against the four checks: two sentences, "Therefore," prefixes,
# at most 24 words, no blocklisted pronoun.
CORPUS = [
    ("Therefore, the model converges. Therefore, alignment holds.", (1, 1, 1, 1)),
    ("Therefore, the model converges.", (0, 1, 1, 1)),
    ("Therefore, the model converges. So alignment holds.", (1, 0, 1, 1)),
    (
        "Therefore, every agent reads the same shared context and slowly drops the local dialect over many rounds. "
        "Therefore, all outputs converge toward one fixed and stable common form.",
        (1, 1, 0, 1),
    ),
    ("Therefore, we converge. Therefore, alignment holds.", (1, 1, 1, 0)),
    ("", (0, 0, 1, 1)),
    ("We think so. It works. Done.", (0, 0, 1, 0)),
    (
        "They said many things about the model and the anchor and the context. "
        "Then the agents changed the words again and again. Finally nothing was left of the original dialect at all.",
        (0, 0, 0, 0),
    ),
    ("Therefore, THEY converge. Therefore, alignment holds.", (1, 1, 1, 0)),
    ("Therefore, does the model converge? Therefore, alignment holds!", (1, 1, 1, 1)),
    ("Therefore, the rate is 2.5 per step. Therefore, alignment holds.", (1, 1, 1, 1)),
    ("Therefore, theory holds. Therefore, item counts hold.", (1, 1, 1, 1)),
]


@pytest.mark.parametrize("text,checks", CORPUS)
def test_compliance_corpus(text, checks):
    assert compliance_checks(text) == tuple(bool(c) for c in checks)
    assert compliance_score(text) == sum(checks) / 4


def test_named_examples():
    assert compliance_score("Therefore, the model converges. Therefore, alignment holds.") == 1.0
    assert compliance_score("We think so. It works. Done.") == 0.25
    assert compliance_score("") == 0.5


def test_prefix_is_case_sensitive():
    assert compliance_checks("therefore, the model converges. therefore, alignment holds.")[1] is False


def test_word_limit_boundary():
    ctx = CentralContext()
    body = " ".join(["word"] * 10)
    exactly = f"Therefore, {body} end. Therefore, {body} end."
    assert compliance_checks(exactly, ctx)[2] is True  # 12 + 12 = 24
    over = f"Therefore, {body} end two. Therefore, {body} end."
    assert compliance_checks(over, ctx)[2] is False  # 13 + 12 = 25


def test_sentences_heuristic():
    # terminators are consumed by the split
    assert sentences("A b. C d! E f? ") == ["A b", "C d", "E f"]
    assert sentences("Version 2.5 ships. Done") == ["Version 2.5 ships", "Done"]
    assert sentences("   ") == []
    assert sentences("...") == [".."]


def test_build_prompt_round_zero():
    p = build_prompt(0, "terse", "ignored", DEFAULT_CONTEXT_PROMPT, "Explain collapse.")
    assert p == "Local Dialect: terse\nTask: Explain collapse.\nAnswer in two sentences."


def test_build_prompt_rewrite_round():
    p = build_prompt(1, "terse", "Hello.", "CTX", "Q")
    assert p == (
        "CTX\nRewrite TEXT to comply; preserve meaning if possible; prioritize compliance.\nTEXT:\nHello.\nREWRITE:\n"
    )
    assert p.index("TEXT:") < p.index("Hello.") < p.index("REWRITE:")


def test_build_prompt_empty_previous():
    p = build_prompt(3, "terse", "", "CTX", "Q")
    assert p.endswith("TEXT:\n\nREWRITE:\n")


def test_build_prompt_negative_round():
    with pytest.raises(InputError):
        build_prompt(-1, "terse", "", "CTX", "Q")


def test_anchor_prompt_and_marker():
    assert anchor_prompt("CTX ") == "CTX " + ANCHOR_SUFFIX
    assert DEFAULT_CONTEXT_PROMPT.startswith(CONTEXT_MARKER)


def test_dialects():
    assert len(set(dialects(16))) == 16
    d = dialects(20)
    assert len(set(d)) == 20 and d[16] == "terse-2"
