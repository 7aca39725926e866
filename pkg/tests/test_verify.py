import math

import numpy as np
import pytest

from semcollapse.errors import InputError
from semcollapse.hashing import fnv1a_64
from semcollapse.rng import seed_sequence, stream
from semcollapse.verify import REPORT_COLUMNS, CheckResult, _run_check, report_csv, report_text, run_verify


def test_stream_is_reproducible():
    a = stream(3, "stochastic_tp", 5).random(8)
    b = stream(3, "stochastic_tp", 5).random(8)
    np.testing.assert_array_equal(a, b)


def test_streams_are_distinct():
    draws = {
        key: stream(*key).random()
        for key in [(0,), (1,), (0, "a"), (0, "b"), (0, "a", 1), (0, "a", 2), (0, 1, "a")]
    }
    assert len(set(draws.values())) == len(draws)


def test_string_keys_use_fnv():
    assert seed_sequence(0, "abc").entropy == [0, fnv1a_64("abc")]
    assert seed_sequence(7, np.int64(2)).entropy == [7, 2]


@pytest.mark.parametrize("bad", [-1, 1.5, None, b"x"])
def test_bad_stream_keys(bad):
    with pytest.raises(TypeError):
        stream(0, bad)


def test_manifold_suite_passes():
    results = run_verify(["manifold"])
    assert results and all(r.passed for r in results), report_text(results)
    assert {r.suite for r in results} == {"manifold"}


def test_unknown_suite():
    with pytest.raises(InputError, match="unknown suite"):
        run_verify(["geometry"])


def test_gradient_fault_is_caught():
    results = run_verify(["alignment"], fault="gradient-sign")
    by_name = {r.name: r for r in results}
    assert not by_name["gradient_check_euclidean"].passed
    assert not by_name["deterministic_contraction"].passed
    assert "0/" in report_text(results).splitlines()[-1]


def test_crashing_check_becomes_failure():
    def boom():
        raise ValueError("bad input")

    r = _run_check("x", "boom", boom)
    assert not r.passed and math.isnan(r.measured)
    assert "ValueError: bad input" in r.detail and "test_verify.py" in r.detail


def test_report_formats():
    rs = [CheckResult("s", "a", True, 1e-12, 1e-9), CheckResult("s", "b", False, 2.0, 1.0, "x, y")]
    csv_text = report_csv(rs)
    assert csv_text.splitlines()[0] == ",".join(REPORT_COLUMNS)
    assert csv_text.splitlines()[2] == 's,b,FAIL,2,1,"x, y"'
    text = report_text(rs)
    assert text.startswith("PASS  s/a") and text.endswith("1/2 checks passed\n")
