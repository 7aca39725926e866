import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcollapse.bench.decoding import (
    REPORT_TEMPERATURE,
    DecodeConfig,
    TokenModel,
    generate_with_probs,
    nucleus,
    tempered,
    top_p_sample,
)
from semcollapse.bench.toy import ToyModel
from semcollapse.errors import BackendError, InputError
from semcollapse.rng import stream


def test_decode_config_invariants():
    DecodeConfig.greedy()
    DecodeConfig.stochastic()
    for bad in (
        dict(mode="greedy", temperature=0.5),
        dict(mode="stochastic", temperature=0.0),
        dict(mode="beam"),
        dict(mode="greedy", top_p=0.0),
        dict(mode="greedy", top_p=1.5),
        dict(mode="greedy", top_k=-1),
    ):
        with pytest.raises(InputError):
            DecodeConfig(**bad)


def test_nucleus_example():
    idx, probs = nucleus([0.5, 0.3, 0.2], 0.7)
    assert idx.tolist() == [0, 1]
    np.testing.assert_allclose(probs, [0.625, 0.375])


def test_nucleus_full_support():
    p = np.array([0.1, 0.6, 0.3])
    idx, probs = nucleus(p, 1.0)
    assert sorted(idx.tolist()) == [0, 1, 2]
    np.testing.assert_allclose(probs, p[idx])


def test_nucleus_top_k_truncation():
    idx, probs = nucleus([0.4, 0.3, 0.2, 0.1], 0.95, k=2)
    assert idx.tolist() == [0, 1]
    np.testing.assert_allclose(probs, [4 / 7, 3 / 7])


def test_nucleus_ties_are_stable():
    idx, _ = nucleus([0.25, 0.25, 0.25, 0.25], 0.5)
    assert idx.tolist() == [0, 1]


def test_nucleus_validation():
    with pytest.raises(InputError):
        nucleus([0.5, 0.5], 0.0)
    with pytest.raises(InputError):
        nucleus([0.5, 0.5], 0.5, k=-1)


def test_top_k_one_is_argmax():
    g = stream(0, "k1")
    p = [0.2, 0.5, 0.3]
    assert {top_p_sample(p, 0.9, 1, g) for _ in range(200)} == {1}


def test_sampler_fidelity():
    g = stream(1, "fidelity")
    n = 100_000
    counts = np.bincount([top_p_sample([0.5, 0.3, 0.2], 0.7, 0, g) for _ in range(n)], minlength=3)
    assert counts[2] == 0
    target = np.array([0.625, 0.375])
    sd = np.sqrt(n * target * (1 - target))
    assert np.all(np.abs(counts[:2] - n * target) <= 3 * sd)


def test_tempered():
    p = np.array([0.5, 0.25, 0.25, 0.0])
    np.testing.assert_array_equal(tempered(p, 1.0), p)
    sharp = tempered(p, 0.5)
    np.testing.assert_allclose(sharp, [4 / 6, 1 / 6, 1 / 6, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 1.0), st.integers(0, 8))
def test_samples_stay_in_nucleus(seed, p0, k):
    g = stream(seed, "prop")
    p = g.dirichlet(np.ones(10))
    idx, probs = nucleus(p, p0, k)
    assert probs.sum() == pytest.approx(1.0)
    # the nucleus is the smallest prefix reaching p0 (unless truncated by k)
    sorted_p = np.sort(p)[::-1]
    if k == 0:
        assert sorted_p[: len(idx)].sum() >= p0 - 1e-12
        assert len(idx) == 1 or sorted_p[: len(idx) - 1].sum() < p0
    draws = {top_p_sample(p, p0, k, g) for _ in range(20)}
    assert draws <= set(idx.tolist())


# -- generation ----------------------------------------------------------------------------


def test_toy_model_satisfies_protocol():
    assert isinstance(ToyModel(), TokenModel)
    assert REPORT_TEMPERATURE == 1.0


def test_generate_zero_tokens():
    m = ToyModel()
    text, p = generate_with_probs(m, "hello", DecodeConfig.greedy(), 0)
    assert text == ""
    np.testing.assert_array_equal(p, m.next_distribution("hello"))


def test_greedy_is_deterministic():
    m = ToyModel()
    a = generate_with_probs(m, "Local Dialect: terse", DecodeConfig.greedy(), 20)
    b = generate_with_probs(m, "Local Dialect: terse", DecodeConfig.greedy(), 20)
    assert a[0] == b[0] and a[0]
    np.testing.assert_array_equal(a[1], b[1])


def test_stochastic_reproducible_with_same_rng_state():
    m = ToyModel()
    cfg = DecodeConfig.stochastic()
    a = generate_with_probs(m, "Local Dialect: terse", cfg, 20, stream(5, "x"))
    b = generate_with_probs(m, "Local Dialect: terse", cfg, 20, stream(5, "x"))
    assert a[0] == b[0]


def test_boundary_reported_at_unit_temperature():
    m = ToyModel()
    _, hot = generate_with_probs(m, "abc", DecodeConfig.stochastic(temperature=2.0), 5, stream(0))
    _, cold = generate_with_probs(m, "abc", DecodeConfig.greedy(), 5)
    np.testing.assert_array_equal(hot, cold)


def test_stochastic_needs_rng():
    with pytest.raises(InputError):
        generate_with_probs(ToyModel(), "abc", DecodeConfig.stochastic(), 5)


def test_max_tokens_respected():
    m = ToyModel()
    text, _ = generate_with_probs(m, "Local Dialect: terse", DecodeConfig.stochastic(), 3, stream(1))
    assert len(text.split()) <= 3


def test_backend_failures_are_wrapped():
    class Broken(ToyModel):
        def next_distribution(self, text):
            raise OSError("pipe closed")

    with pytest.raises(BackendError, match="pipe closed"):
        generate_with_probs(Broken(), "abc", DecodeConfig.greedy(), 3)
