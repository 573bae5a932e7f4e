"""Token mask index: oracle equivalence, persistence, stepping semantics."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capjudge.errors import EmptyMask, IndexFormatError, InvalidToken
from capjudge.grammar import (
    TERMINAL,
    TokenMaskIndex,
    build_mask_index,
    brute_force_mask,
    compile_schema,
    scan_stats,
)
from capjudge.vocab import synthetic_vocabulary
from helpers import text_vocab


def test_masks_match_brute_force_on_synthetic_vocab(automaton, small_vocab, small_index):
    for state in small_index.states():
        assert small_index.mask_bytes(state) == brute_force_mask(
            automaton, small_vocab, state
        )


def test_eos_never_in_state_mask(small_vocab, small_index):
    for state in small_index.states():
        assert not small_index.contains(state, small_vocab.eos_id)


def test_empty_text_token_never_in_mask(automaton, fingerprint):
    vocab = text_vocab(*'{"score: 10,reason}death', "", "ab")
    empty_id = vocab.tokens.index("")
    index = build_mask_index(automaton, vocab, fingerprint)
    for state in index.states():
        assert not index.contains(state, empty_id)


def test_sampling_mask_adds_eos_only_at_accepting(automaton, small_vocab, small_index):
    for state in small_index.states():
        mask = small_index.sampling_mask(state)
        assert mask.dtype == np.bool_
        assert mask.shape == (small_vocab.size,)
        assert bool(mask[small_vocab.eos_id]) == automaton.is_accepting(state)
        with pytest.raises(ValueError):
            mask[0] = True  # views are frozen


def test_allowed_ids_round_trip(small_index, small_vocab):
    state = small_index.automaton.start
    ids = small_index.allowed_ids(state)
    assert ids, "start state must allow at least one token"
    for tid in ids:
        assert small_index.contains(state, tid)
    assert sum(
        small_index.contains(state, t) for t in range(small_vocab.size)
    ) == len(ids)


def test_advance_follows_token_text(automaton, small_index, small_vocab):
    state = automaton.start
    pieces = ['{"', *"score", '":', " 10", ', "', *"reason", '": ', '"', *"ok", '"}']
    for piece in pieces:
        tid = small_vocab.tokens.index(piece)
        assert small_index.contains(state, tid)
        state = small_index.advance(state, tid)
    assert automaton.is_accepting(state)
    assert small_index.may_stop(state)
    assert small_index.advance(state, small_vocab.eos_id) == TERMINAL


def test_advance_rejects_disallowed_token(automaton, small_index, small_vocab):
    start = automaton.start
    bad = small_vocab.tokens.index("a")
    with pytest.raises(InvalidToken):
        small_index.advance(start, bad)
    with pytest.raises(InvalidToken):
        small_index.advance(start, small_vocab.eos_id)  # not accepting yet


def test_vocab_without_open_brace_raises_empty_mask(automaton, fingerprint):
    vocab = text_vocab(*'"score reason:, 0123456789}ab')
    with pytest.raises(EmptyMask) as excinfo:
        build_mask_index(automaton, vocab, fingerprint)
    assert excinfo.value.context["state"] == automaton.start


def test_vocab_missing_digits_dies_at_the_digit_state(automaton, fingerprint):
    vocab = text_vocab(*'{"score:,reason}ab ')
    with pytest.raises(EmptyMask):
        build_mask_index(automaton, vocab, fingerprint)


def test_multi_char_tokens_cross_structure(automaton, fingerprint):
    vocab = text_vocab('{"score": 100, "reason": "', 'done"}', "x")
    index = build_mask_index(automaton, vocab, fingerprint)
    state = automaton.start
    state = index.advance(state, 1)
    state = index.advance(state, 2)
    assert automaton.is_accepting(state)


def test_shortest_completion_present_and_valid(automaton, small_index):
    state = automaton.run(automaton.start, '{"score": 10, "reason": "abc')
    suffix = small_index.shortest_completion(state)
    assert suffix == '"}'
    assert automaton.accepts('{"score": 10, "reason": "abc' + suffix)
    accepting = automaton.run(automaton.start, '{"score": 0, "reason": ""}')
    assert small_index.shortest_completion(accepting) == ""


def test_round_trip_bytes(automaton, small_vocab, small_index, fingerprint):
    blob = small_index.to_bytes()
    loaded = TokenMaskIndex.from_bytes(blob, automaton, small_vocab, fingerprint)
    assert loaded.to_bytes() == blob
    for state in small_index.states():
        assert loaded.mask_bytes(state) == small_index.mask_bytes(state)


def test_save_load_file(tmp_path, automaton, small_vocab, small_index, fingerprint):
    path = tmp_path / "index.bin"
    small_index.save(path)
    loaded = TokenMaskIndex.load(path, automaton, small_vocab, fingerprint)
    assert loaded.digest() == small_index.digest()


def test_rebuild_is_byte_identical(automaton, small_vocab, fingerprint):
    a = build_mask_index(automaton, small_vocab, fingerprint)
    b = build_mask_index(automaton, small_vocab, fingerprint)
    assert a.to_bytes() == b.to_bytes()


def test_load_rejects_wrong_vocab(automaton, small_index, fingerprint):
    other = synthetic_vocabulary(600, seed=8)
    with pytest.raises(IndexFormatError):
        TokenMaskIndex.from_bytes(
            small_index.to_bytes(), automaton, other, fingerprint
        )


def test_load_rejects_wrong_fingerprint(automaton, small_vocab, small_index):
    with pytest.raises(IndexFormatError):
        TokenMaskIndex.from_bytes(
            small_index.to_bytes(), automaton, small_vocab, "0" * 16
        )


def test_load_rejects_corruption(automaton, small_vocab, small_index, fingerprint):
    blob = bytearray(small_index.to_bytes())
    blob[0] ^= 0xFF  # magic
    with pytest.raises(IndexFormatError):
        TokenMaskIndex.from_bytes(bytes(blob), automaton, small_vocab, fingerprint)
    with pytest.raises(IndexFormatError):
        TokenMaskIndex.from_bytes(
            small_index.to_bytes()[:-3], automaton, small_vocab, fingerprint
        )
    with pytest.raises(IndexFormatError):
        TokenMaskIndex.from_bytes(
            small_index.to_bytes() + b"xx", automaton, small_vocab, fingerprint
        )


def test_brute_force_counts_scans(automaton, small_vocab):
    before = scan_stats.vocab_scans
    brute_force_mask(automaton, small_vocab, automaton.start)
    assert scan_stats.vocab_scans == before + 1


def test_index_build_does_not_scan(automaton, small_vocab, fingerprint):
    before = scan_stats.vocab_scans
    build_mask_index(automaton, small_vocab, fingerprint)
    assert scan_stats.vocab_scans == before


_TOKEN_ALPHABET = '{}":, 0123456789abcreason score"\\'


@given(
    st.lists(
        st.text(alphabet=_TOKEN_ALPHABET, min_size=1, max_size=6),
        min_size=1,
        max_size=40,
        unique=True,
    )
)
@settings(max_examples=120, deadline=None)
def test_masks_match_brute_force_on_random_vocabs(tokens):
    automaton = compile_schema()
    vocab = text_vocab(*tokens)
    try:
        index = build_mask_index(automaton, vocab, "f" * 16)
    except EmptyMask:
        # legitimately unexpressive vocabulary; the oracle must agree that
        # some reachable state allows nothing
        return
    for state in index.states():
        assert index.mask_bytes(state) == brute_force_mask(automaton, vocab, state)


@given(st.data())
@settings(max_examples=80, deadline=None)
def test_advance_matches_char_run(automaton, small_vocab, small_index, data):
    state = automaton.start
    text = ""
    for _ in range(data.draw(st.integers(1, 8))):
        ids = small_index.allowed_ids(state)
        tid = data.draw(st.sampled_from(ids))
        state = small_index.advance(state, tid)
        text += small_vocab.text(tid)
        assert automaton.run(automaton.start, text) == state
