"""Per-state token masks for constrained decoding.

For every automaton state reachable during generation, the index stores a
dense bitset over the vocabulary marking which tokens keep the output inside
the schema language. Masks are built once by walking a trie of token texts
against the automaton, so tokens sharing a prefix are simulated through that
prefix a single time; generation then only does bitset lookups plus a short
character walk for the one token actually chosen.

``brute_force_mask`` is the slow reference implementation: it re-simulates
every vocabulary entry from scratch. It exists for verification only, and it
is the sole place the ``scan_stats`` counter is incremented — so the counter
staying at zero across a generation proves no full-vocabulary rescans
happened on the hot path.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..digests import sha256_hex
from ..errors import EmptyMask, IndexFormatError, InvalidToken
from ..vocab import Vocabulary
from .automaton import TERMINAL, CharAutomaton

_MAGIC = b"CJMI"
_FORMAT_VERSION = 1


@dataclass
class ScanStats:
    """Counts full-vocabulary simulations; see module docstring."""

    vocab_scans: int = 0

    def reset(self) -> None:
        self.vocab_scans = 0


scan_stats = ScanStats()


@dataclass
class _Trie:
    children: list[dict[str, int]] = field(default_factory=lambda: [{}])
    ends: list[list[int]] = field(default_factory=lambda: [[]])

    def insert(self, text: str, token_id: int) -> None:
        node = 0
        for ch in text:
            nxt = self.children[node].get(ch)
            if nxt is None:
                self.children.append({})
                self.ends.append([])
                nxt = len(self.children) - 1
                self.children[node][ch] = nxt
            node = nxt
        self.ends[node].append(token_id)


def _build_trie(vocab: Vocabulary) -> _Trie:
    trie = _Trie()
    for token_id in range(vocab.size):
        if vocab.mask_eligible(token_id):
            trie.insert(vocab.text(token_id), token_id)
    return trie


def _walk_state(
    trie: _Trie, automaton: CharAutomaton, src: int, nbytes: int
) -> tuple[bytes, set[int]]:
    """One pass over the trie from ``src``; returns (bitset, landing states)."""
    bits = bytearray(nbytes)
    landing: set[int] = set()
    step = automaton.step
    children = trie.children
    ends = trie.ends
    stack = [(0, src)]
    while stack:
        node, state = stack.pop()
        for token_id in ends[node]:
            bits[token_id >> 3] |= 1 << (token_id & 7)
        if ends[node]:
            landing.add(state)
        for ch, child in children[node].items():
            nxt = step(state, ch)
            if nxt is not None:
                stack.append((child, nxt))
    return bytes(bits), landing


class TokenMaskIndex:
    """Precomputed valid-token bitsets for every generation-reachable state."""

    def __init__(
        self,
        automaton: CharAutomaton,
        vocab: Vocabulary,
        masks: dict[int, bytes],
        schema_fingerprint: str,
    ):
        self.automaton = automaton
        self.vocab = vocab
        self.masks = masks
        self.schema_fingerprint = schema_fingerprint
        self._int_views: dict[int, int] = {}
        self._sampling_views: dict[int, np.ndarray] = {}
        self._completions: dict[int, str | None] = {}

    # -- queries ---------------------------------------------------------

    def states(self) -> list[int]:
        return sorted(self.masks)

    def mask_bytes(self, state: int) -> bytes:
        return self.masks[state]

    def mask_int(self, state: int) -> int:
        view = self._int_views.get(state)
        if view is None:
            view = int.from_bytes(self.masks[state], "little")
            self._int_views[state] = view
        return view

    def contains(self, state: int, token_id: int) -> bool:
        return (self.mask_int(state) >> token_id) & 1 == 1

    def allowed_ids(self, state: int) -> list[int]:
        mask = self.mask_int(state)
        out = []
        token_id = 0
        while mask:
            if mask & 1:
                out.append(token_id)
            mask >>= 1
            token_id += 1
        return out

    def sampling_mask(self, state: int) -> np.ndarray:
        """Boolean mask over all token ids; eos is set iff output may stop."""
        view = self._sampling_views.get(state)
        if view is None:
            packed = np.frombuffer(self.masks[state], dtype=np.uint8)
            view = np.unpackbits(packed, bitorder="little")[: self.vocab.size].astype(
                bool
            )
            if self.automaton.is_accepting(state):
                view[self.vocab.eos_id] = True
            view.setflags(write=False)
            self._sampling_views[state] = view
        return view

    def may_stop(self, state: int) -> bool:
        return self.automaton.is_accepting(state)

    # -- transitions -----------------------------------------------------

    def advance(self, state: int, token_id: int) -> int:
        """Consume one chosen token; TERMINAL marks a completed output."""
        if token_id == self.vocab.eos_id:
            if self.automaton.is_accepting(state):
                return TERMINAL
            raise InvalidToken(
                f"eos is not valid in state {state}: output incomplete",
                state=state,
                token_id=token_id,
            )
        if state not in self.masks or not self.contains(state, token_id):
            raise InvalidToken(
                f"token {token_id} ({self.vocab.text(token_id)!r}) is not valid "
                f"in state {state}",
                state=state,
                token_id=token_id,
            )
        nxt = self.automaton.run(state, self.vocab.text(token_id))
        assert nxt is not None  # the mask bit guarantees a live path
        return nxt

    def shortest_completion(self, state: int) -> str | None:
        """Minimal character suffix reaching acceptance, or None if stuck."""
        if state in self._completions:
            return self._completions[state]
        suffix = _shortest_completion(self.automaton, state)
        self._completions[state] = suffix
        return suffix

    # -- serialization ---------------------------------------------------

    def to_bytes(self) -> bytes:
        out = [
            _MAGIC,
            struct.pack("<I", _FORMAT_VERSION),
            self.schema_fingerprint.encode("ascii"),
            self.vocab.digest().encode("ascii"),
            struct.pack(
                "<III", self.vocab.size, self.vocab.eos_id, self.automaton.n_states
            ),
            struct.pack("<I", len(self.masks)),
        ]
        for state in sorted(self.masks):
            bits = self.masks[state]
            out.append(struct.pack("<II", state, len(bits)))
            out.append(bits)
        return b"".join(out)

    def save(self, path) -> None:
        with open(path, "wb") as handle:
            handle.write(self.to_bytes())

    @classmethod
    def from_bytes(
        cls,
        payload: bytes,
        automaton: CharAutomaton,
        vocab: Vocabulary,
        schema_fingerprint: str,
    ) -> "TokenMaskIndex":
        view = memoryview(payload)
        if bytes(view[:4]) != _MAGIC:
            raise IndexFormatError("bad magic; not a token mask index")
        (version,) = struct.unpack_from("<I", view, 4)
        if version != _FORMAT_VERSION:
            raise IndexFormatError(f"unsupported index version {version}")
        stored_fp = bytes(view[8:24]).decode("ascii")
        stored_digest = bytes(view[24:88]).decode("ascii")
        if stored_fp != schema_fingerprint:
            raise IndexFormatError(
                "index was built for a different schema",
                expected=schema_fingerprint,
                found=stored_fp,
            )
        if stored_digest != vocab.digest():
            raise IndexFormatError(
                "index was built for a different vocabulary",
                expected=vocab.digest(),
                found=stored_digest,
            )
        size, eos_id, n_states = struct.unpack_from("<III", view, 88)
        if size != vocab.size or eos_id != vocab.eos_id:
            raise IndexFormatError("vocabulary shape mismatch")
        if n_states != automaton.n_states:
            raise IndexFormatError("automaton shape mismatch")
        (n_masks,) = struct.unpack_from("<I", view, 100)
        offset = 104
        masks: dict[int, bytes] = {}
        for _ in range(n_masks):
            if offset + 8 > len(payload):
                raise IndexFormatError("truncated index payload")
            state, nbytes = struct.unpack_from("<II", view, offset)
            offset += 8
            if offset + nbytes > len(payload):
                raise IndexFormatError("truncated index payload")
            masks[state] = bytes(view[offset : offset + nbytes])
            offset += nbytes
        if offset != len(payload):
            raise IndexFormatError("trailing bytes after index payload")
        return cls(automaton, vocab, masks, schema_fingerprint)

    @classmethod
    def load(
        cls,
        path,
        automaton: CharAutomaton,
        vocab: Vocabulary,
        schema_fingerprint: str,
    ) -> "TokenMaskIndex":
        with open(path, "rb") as handle:
            return cls.from_bytes(handle.read(), automaton, vocab, schema_fingerprint)

    def digest(self) -> str:
        return sha256_hex(self.to_bytes())


def build_mask_index(
    automaton: CharAutomaton, vocab: Vocabulary, schema_fingerprint: str
) -> TokenMaskIndex:
    """Build masks for every state reachable by whole-token steps from start.

    Raises EmptyMask for a reachable state where generation could neither
    emit any token nor stop.
    """
    trie = _build_trie(vocab)
    nbytes = (vocab.size + 7) // 8
    masks: dict[int, bytes] = {}
    queue = deque([automaton.start])
    while queue:
        state = queue.popleft()
        if state in masks:
            continue
        bits, landing = _walk_state(trie, automaton, state, nbytes)
        if not any(bits) and not automaton.is_accepting(state):
            raise EmptyMask(
                f"state {state} allows no token and cannot stop; the vocabulary "
                "cannot express the schema from here",
                state=state,
            )
        masks[state] = bits
        for nxt in landing:
            if nxt not in masks:
                queue.append(nxt)
    return TokenMaskIndex(automaton, vocab, masks, schema_fingerprint)


def brute_force_mask(
    automaton: CharAutomaton, vocab: Vocabulary, state: int
) -> bytes:
    """Reference mask: simulate every vocabulary token independently.

    Increments ``scan_stats.vocab_scans``; production code must never call
    this during generation.
    """
    scan_stats.vocab_scans += 1
    nbytes = (vocab.size + 7) // 8
    bits = bytearray(nbytes)
    for token_id in range(vocab.size):
        if not vocab.mask_eligible(token_id):
            continue
        if automaton.run(state, vocab.text(token_id)) is not None:
            bits[token_id >> 3] |= 1 << (token_id & 7)
    return bytes(bits)


def _shortest_completion(automaton: CharAutomaton, state: int) -> str | None:
    """BFS for the shortest character suffix from ``state`` to acceptance."""
    if automaton.is_accepting(state):
        return ""
    parents: dict[int, tuple[int, str]] = {state: (state, "")}
    queue = deque([state])
    goal = None
    while queue:
        current = queue.popleft()
        edges = dict(automaton.explicit_edges(current))
        wild = automaton.wildcard_target(current)
        if wild is not None and wild not in edges.values():
            for candidate in "a0 ":
                if candidate not in edges:
                    edges[candidate] = wild
                    break
        for ch, nxt in sorted(edges.items()):
            if nxt in parents:
                continue
            parents[nxt] = (current, ch)
            if automaton.is_accepting(nxt):
                goal = nxt
                queue.clear()
                break
            queue.append(nxt)
    if goal is None:
        return None
    chars: list[str] = []
    node = goal
    while node != state:
        node, ch = parents[node]
        chars.append(ch)
    return "".join(reversed(chars))
