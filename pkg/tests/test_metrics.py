"""Lexical baselines: n-gram precision score and longest-common-subsequence F."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capjudge.errors import DomainError, EmptyCandidate
from capjudge.metrics import METRICS, bleu, rouge_l, tokenize


# --- tokenization --------------------------------------------------------

def test_tokenize_lowercases_and_splits():
    assert tokenize("A dog Barks, loudly!") == ["a", "dog", "barks", "loudly"]
    assert tokenize("it's") == ["it", "s"]
    assert tokenize("") == []
    assert tokenize("...") == []


# --- identity / disjoint anchors ----------------------------------------

@pytest.mark.parametrize("metric", [1, 4])
def test_bleu_identity(metric):
    text = "rain falls on a tin roof in the distance"
    assert bleu(text, [text], max_n=metric) == pytest.approx(1.0)


def test_rouge_identity():
    text = "rain falls on a tin roof"
    assert rouge_l(text, [text]) == pytest.approx(1.0)


@pytest.mark.parametrize("metric", [1, 4])
def test_bleu_disjoint(metric):
    assert bleu("aa bb cc dd", ["xx yy zz ww"], max_n=metric) == 0.0


def test_rouge_disjoint():
    assert rouge_l("aa bb cc dd", ["xx yy zz ww"]) == 0.0


def test_bleu1_hand_example():
    # 3 of 4 unigrams match and the reference has the same length
    assert bleu("a b c d", ["a b x d"], max_n=1) == pytest.approx(0.75)


# --- modified precision and clipping ------------------------------------

def test_bleu1_clips_repeated_words():
    # candidate repeats "the" 4 times; reference contains it at most twice
    value = bleu("the the the the", ["the cat the mat"], max_n=1)
    assert value == pytest.approx(2 / 4)


def test_bleu1_clips_by_best_reference():
    value = bleu("the the the the", ["the cat", "the the mat"], max_n=1)
    assert value == pytest.approx(2 / 4)  # best single-ref count is 2


def test_bleu4_geometric_mean_and_smoothing():
    cand = "a b c d e"
    ref = "a b c x e"
    p1 = 4 / 5
    p2 = 2 / 4  # "a b", "b c" match; "c d", "d e" do not
    p3 = 1 / 3  # only "a b c"
    p4 = (0 + 1) / (2 + 1)  # no 4-gram matches: add-one smoothing
    expected = (p1 * p2 * p3 * p4) ** 0.25
    assert bleu(cand, [ref], max_n=4) == pytest.approx(expected)


def test_bleu4_identity_not_diluted_by_smoothing():
    # smoothing only applies when a precision is 0/…, so identity stays 1.0
    assert bleu("a b", ["a b"], max_n=4) == pytest.approx(1.0)


def test_bleu_zero_unigram_overlap_is_zero_even_with_smoothing():
    assert bleu("qq ww ee rr tt", ["aa bb cc dd ff"], max_n=4) == 0.0


def test_brevity_penalty_applies_when_short():
    # candidate 2 tokens, reference 4: BP = exp(1 - 4/2)
    value = bleu("a b", ["a b c d"], max_n=1)
    assert value == pytest.approx(math.exp(1 - 4 / 2))


def test_brevity_penalty_follows_closest_reference_length():
    # lengths 2 and 8 bracket the 4-token candidate; 2 is closer and not
    # longer, so no penalty
    assert bleu("a b c d", ["a b", "a b c d e f g h"], max_n=1) == pytest.approx(1.0)
    # a 5-token reference is closer than the 2-token one and longer than
    # the candidate, so the penalty follows it even though a shorter
    # reference exists
    value = bleu("a b c d", ["a b", "a b c d e"], max_n=1)
    assert value == pytest.approx(math.exp(1 - 5 / 4))


def test_brevity_penalty_tie_prefers_shorter_reference():
    # lengths 3 and 5 are equally close to 4; the shorter wins, no penalty
    assert bleu("a b c d", ["a b c", "a b c d e"], max_n=1) == pytest.approx(1.0)


def test_no_brevity_penalty_when_long():
    assert bleu("a b c d", ["a b"], max_n=1) == pytest.approx(2 / 4)


# --- rouge ---------------------------------------------------------------

def test_rouge_partial_value():
    # candidate "a b c d", reference "a c d e": LCS = a c d (3)
    precision = 3 / 4
    recall = 3 / 4
    beta_sq = 1.2**2
    expected = (1 + beta_sq) * precision * recall / (recall + beta_sq * precision)
    assert rouge_l("a b c d", ["a c d e"]) == pytest.approx(expected)


def test_rouge_takes_max_over_references():
    single = rouge_l("a b c d", ["a c d e"])
    with_better = rouge_l("a b c d", ["zz", "a c d e", "a b c d"])
    assert with_better == pytest.approx(1.0)
    assert with_better >= single


def test_rouge_asymmetric_beta():
    # beta > 1 weights recall: swapping candidate and reference changes F
    ab = rouge_l("a b c d e", ["a b"])
    ba = rouge_l("a b", ["a b c d e"])
    assert ab != pytest.approx(ba)


# --- input validation ----------------------------------------------------

@pytest.mark.parametrize("metric_fn", [lambda c, r: bleu(c, r, max_n=1), rouge_l])
def test_empty_candidate_raises(metric_fn):
    with pytest.raises(EmptyCandidate):
        metric_fn("", ["a b"])
    with pytest.raises(EmptyCandidate):
        metric_fn("!!!", ["a b"])


@pytest.mark.parametrize("metric_fn", [lambda c, r: bleu(c, r, max_n=1), rouge_l])
def test_no_references_raises(metric_fn):
    with pytest.raises(DomainError):
        metric_fn("a b", [])


def test_bleu_max_n_restricted():
    with pytest.raises(ValueError):
        bleu("a", ["a"], max_n=2)
    with pytest.raises(ValueError):
        bleu("a", ["a"], max_n=0)


def test_metric_registry():
    assert set(METRICS) == {"bleu1", "bleu4", "rougel"}
    assert METRICS["bleu1"]("a b c d", ["a b x d"]) == pytest.approx(0.75)
    assert METRICS["bleu4"]("a b", ["a b"]) == pytest.approx(1.0)
    assert METRICS["rougel"]("a b", ["a b"]) == pytest.approx(1.0)


# --- properties ----------------------------------------------------------

_sentences = st.lists(
    st.sampled_from("rain wind dog car bird water door bell crowd fire".split()),
    min_size=1,
    max_size=12,
).map(" ".join)


@given(cand=_sentences, refs=st.lists(_sentences, min_size=1, max_size=4))
@settings(max_examples=200)
def test_metric_ranges(cand, refs):
    for fn in (METRICS["bleu1"], METRICS["bleu4"], METRICS["rougel"]):
        value = fn(cand, refs)
        assert 0.0 <= value <= 1.0


@given(
    cand=_sentences,
    refs=st.lists(_sentences, min_size=1, max_size=3),
    extra=_sentences,
)
@settings(max_examples=200)
def test_adding_a_reference_never_hurts_rouge(cand, refs, extra):
    # ROUGE-L takes the best reference, so more references cannot hurt.
    # BLEU has no such guarantee: a new reference can move the closest
    # length above the candidate's and introduce a brevity penalty.
    assert rouge_l(cand, refs + [extra]) >= rouge_l(cand, refs) - 1e-12


@given(
    cand=_sentences,
    refs=st.lists(_sentences, min_size=1, max_size=3),
)
@settings(max_examples=200)
def test_bleu_monotonic_safe_additions(cand, refs):
    for fn in (METRICS["bleu1"], METRICS["bleu4"]):
        base = fn(cand, refs)
        # a duplicate reference changes neither clipping nor lengths
        assert fn(cand, refs + [refs[0]]) == pytest.approx(base)
        # a reference exactly as long as the candidate pins the brevity
        # penalty at 1, so it can only help
        same_length = " ".join(["zz"] * max(len(cand.split()), 1))
        assert fn(cand, refs + [same_length]) >= base - 1e-12


@given(cand=_sentences, refs=st.lists(_sentences, min_size=1, max_size=4))
@settings(max_examples=100)
def test_identity_among_references_scores_one(cand, refs):
    for fn in (METRICS["bleu1"], METRICS["bleu4"], METRICS["rougel"]):
        assert fn(cand, refs + [cand]) == pytest.approx(1.0)
