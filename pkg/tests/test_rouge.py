from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sotapipe import lcskernel
from sotapipe.rouge import rouge_l, rouge_lsum, rouge_n, split_sentences, tokenize


# ---------------------------------------------------------------------------
# frozen hand-computed oracles
# ---------------------------------------------------------------------------

def test_rouge1_unigram_overlap():
    # overlap {the, cat} = 2 of 3 tokens each side -> P = R = 2/3, F = 66.67
    assert rouge_n("the cat sat", "the cat ran", 1) == pytest.approx(66.67, abs=0.01)


def test_rouge1_clipped_counts():
    # cand [a,a,b] vs ref [a,c]: clipped overlap 1 -> P=1/3, R=1/2, F=0.4
    assert rouge_n("a a b", "a c", 1) == pytest.approx(40.0, abs=0.01)


def test_rouge2_bigram_overlap():
    # cand bigrams 5, ref bigrams 4, shared {the cat, on the, the mat} = 3
    # P = 3/5, R = 3/4, F = 2*.6*.75/1.35 = 66.67
    assert rouge_n("the cat sat on the mat", "the cat on the mat", 2) == pytest.approx(
        66.67, abs=0.01
    )


def test_rougel_lcs_example():
    # LCS("a x b y c", "a b c") = 3 -> P = 3/5, R = 1, F = 75.0
    assert rouge_l("a x b y c", "a b c") == pytest.approx(75.0, abs=0.01)


def test_rougel_reversed_pair():
    # LCS("b a", "a b") = 1 -> P = R = 1/2, F = 50.0
    assert rouge_l("b a", "a b") == pytest.approx(50.0, abs=0.01)


def test_rougelsum_union_lcs():
    # ref sentences [a b c], [d e f]; cand [a b c], [x y f]
    # union hits: 3 (first ref sent) + 1 ("f") = 4 of 6/6 -> F = 66.67
    assert rouge_lsum("a b c. x y f.", "a b c. d e f.") == pytest.approx(66.67, abs=0.01)


def test_rougelsum_single_sentence_equals_rougel():
    pair = ("the quick brown fox", "the slow brown fox")
    assert rouge_lsum(*pair) == pytest.approx(rouge_l(*pair), abs=1e-9)


def test_rougelsum_concatenated_reference():
    assert rouge_lsum("First part here. Second part there.",
                      "First part here. Second part there.") == 100.0


# ---------------------------------------------------------------------------
# identity / disjoint / empty rules
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("text", ["identical", "two words", "a b c d e", "93.4 F1 score!"])
def test_identity_scores_exactly_100(text):
    assert rouge_n(text, text, 1) == 100.0
    assert rouge_n(text, text, 2) == 100.0
    assert rouge_l(text, text) == 100.0
    assert rouge_lsum(text, text) == 100.0


def test_disjoint_scores_exactly_0():
    assert rouge_n("a b c", "d e f", 1) == 0.0
    assert rouge_l("a b c", "d e f") == 0.0
    assert rouge_lsum("a b c.", "d e f.") == 0.0


def test_empty_rules():
    assert rouge_n("", "", 1) == 100.0
    assert rouge_l("", "") == 100.0
    assert rouge_lsum("", "") == 100.0
    assert rouge_n("something", "", 1) == 0.0
    assert rouge_l("", "something") == 0.0
    assert rouge_lsum("something.", "") == 0.0


def test_tokenization_casefolds_and_splits_punctuation():
    assert tokenize("CoNLL-2003, F1!") == ["conll", "2003", "f1"]
    assert split_sentences("One two. Three four!\nFive") == [
        ["one", "two"], ["three", "four"], ["five"],
    ]


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.text(min_size=1, max_size=60))
def test_symmetric_identity_property(text):
    assert rouge_n(text, text, 1) == 100.0
    assert rouge_n(text, text, 2) == 100.0
    assert rouge_l(text, text) == 100.0
    assert rouge_lsum(text, text) == 100.0


@settings(max_examples=60, deadline=None)
@given(st.text(max_size=40), st.text(max_size=40))
def test_range_property(a, b):
    for score in (rouge_n(a, b, 1), rouge_n(a, b, 2), rouge_l(a, b), rouge_lsum(a, b)):
        assert 0.0 <= score <= 100.0


def test_repeated_sentences_cannot_exceed_100():
    # without per-token capping this would score precision > 1
    assert rouge_lsum("a b.", "a b. a b. a b.") <= 100.0


# ---------------------------------------------------------------------------
# kernel parity: numba path vs numpy fallback
# ---------------------------------------------------------------------------

def test_lcs_kernel_paths_agree():
    rng = random.Random(0)
    for _ in range(200):
        a = np.array([rng.randrange(6) for _ in range(rng.randrange(0, 12))], dtype=np.int64)
        b = np.array([rng.randrange(6) for _ in range(rng.randrange(0, 12))], dtype=np.int64)
        expected = _lcs_bruteforce(list(a), list(b))
        assert lcskernel._lcs_length_np(a, b) == expected
        if lcskernel.NUMBA_ENABLED:
            assert int(lcskernel._lcs_length_nb(a, b)) == expected
        mask = lcskernel.lcs_match_mask(a, b)
        assert int(mask.sum()) == expected
        # masked positions really form a common subsequence
        sub = [x for x, keep in zip(a, mask) if keep]
        assert _is_subsequence(sub, list(b))


def _lcs_bruteforce(a: list, b: list) -> int:
    # classic quadratic DP, independent of the kernel implementations
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


def _is_subsequence(sub: list, seq: list) -> bool:
    it = iter(seq)
    return all(any(x == y for y in it) for x in sub)
