"""Character-level automaton for the judge's JSON output schema.

The required output language is a single JSON object with a "score" key
(integer 0-100, no leading zeros) followed by a "reason" key (JSON string
with standard escapes), with at most one optional space after ``:`` and
``,``. That language is regular, so a DFA over unicode characters suffices;
the automaton interface is kept separate from its construction so a stack-
based backend could be slotted in later for non-regular schemas.

States carry explicit per-character transitions plus, for string content, a
single wildcard transition covering every character that is not a control
character and not explicitly mapped. This keeps the automaton finite while
accepting arbitrary unicode inside the reason string.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from string import hexdigits

from ..digests import canonical_json, sha256_hex

#: Distinguished result of consuming eos from an accepting state.
TERMINAL = -1

_DIGITS = "0123456789"
_ESCAPABLE = '"\\/bfnrt'
_HEX = "".join(sorted(set(hexdigits)))
_MIN_PRINTABLE = 0x20


@dataclass(frozen=True)
class SchemaGrammar:
    """Declarative description of the fixed score/reason output schema.

    Only the canonical schema is supported: two keys in fixed order, an
    integer score in [0, 100], and single optional spaces after structural
    separators. The knobs exist so tests can exercise degenerate variants,
    not to support arbitrary grammars.
    """

    score_key: str = "score"
    reason_key: str = "reason"
    score_min: int = 0
    score_max: int = 100
    space_after_colon: bool = True
    space_after_comma: bool = True

    def __post_init__(self):
        if (self.score_min, self.score_max) != (0, 100):
            raise ValueError("only the 0-100 score range is supported")
        for key in (self.score_key, self.reason_key):
            if not key or any(c in key for c in '"\\') or key.isspace():
                raise ValueError(f"invalid key {key!r}")

    def fingerprint(self) -> str:
        return sha256_hex(canonical_json(asdict(self)))[:16]


class CharAutomaton:
    """Deterministic character automaton with wildcard self-loops.

    Immutable after construction; safe to share across concurrent
    generations.
    """

    def __init__(
        self,
        n_states: int,
        start: int,
        accepting: frozenset[int],
        chars: tuple[dict[str, int], ...],
        wildcard: tuple[int | None, ...],
        live: frozenset[int],
    ):
        self.n_states = n_states
        self.start = start
        self.accepting = accepting
        self._chars = chars
        self._wildcard = wildcard
        self.live = live

    def step(self, state: int, ch: str) -> int | None:
        """Single-character transition; None when undefined."""
        nxt = self._chars[state].get(ch)
        if nxt is not None:
            return nxt
        wild = self._wildcard[state]
        if wild is not None and ord(ch) >= _MIN_PRINTABLE:
            return wild
        return None

    def run(self, state: int, text: str) -> int | None:
        """Consume ``text`` character by character; None on the first dead end."""
        chars = self._chars
        wildcard = self._wildcard
        for ch in text:
            nxt = chars[state].get(ch)
            if nxt is None:
                wild = wildcard[state]
                if wild is None or ord(ch) < _MIN_PRINTABLE:
                    return None
                nxt = wild
            state = nxt
        return state

    def accepts(self, text: str) -> bool:
        state = self.run(self.start, text)
        return state is not None and state in self.accepting

    def is_accepting(self, state: int) -> bool:
        return state in self.accepting

    def explicit_edges(self, state: int) -> dict[str, int]:
        return dict(self._chars[state])

    def wildcard_target(self, state: int) -> int | None:
        return self._wildcard[state]


class _Builder:
    def __init__(self):
        self.chars: list[dict[str, int]] = []
        self.wildcard: list[int | None] = []
        self.accepting: set[int] = set()

    def new_state(self) -> int:
        self.chars.append({})
        self.wildcard.append(None)
        return len(self.chars) - 1

    def edge(self, src: int, ch: str, dst: int) -> None:
        existing = self.chars[src].get(ch)
        if existing is not None and existing != dst:
            raise AssertionError(f"nondeterministic edge at state {src} on {ch!r}")
        self.chars[src][ch] = dst

    def literal(self, src: int, text: str) -> int:
        state = src
        for ch in text:
            nxt = self.chars[state].get(ch)
            if nxt is None:
                nxt = self.new_state()
                self.edge(state, ch, nxt)
            state = nxt
        return state

    def set_wildcard(self, src: int, dst: int) -> None:
        self.wildcard[src] = dst

    def finish(self, start: int) -> CharAutomaton:
        live = self._live_states()
        if start not in live:
            raise AssertionError("start state is dead; schema language is empty")
        if not self.accepting <= live:
            raise AssertionError("accepting state marked dead")
        keep = sorted(live)
        remap = {old: new for new, old in enumerate(keep)}
        chars = tuple(
            {ch: remap[dst] for ch, dst in self.chars[old].items() if dst in live}
            for old in keep
        )
        wildcard = tuple(
            remap[self.wildcard[old]]
            if self.wildcard[old] is not None and self.wildcard[old] in live
            else None
            for old in keep
        )
        return CharAutomaton(
            n_states=len(keep),
            start=remap[start],
            accepting=frozenset(remap[s] for s in self.accepting),
            chars=chars,
            wildcard=wildcard,
            live=frozenset(range(len(keep))),
        )

    def _live_states(self) -> set[int]:
        # Backward reachability from accepting states.
        reverse: list[set[int]] = [set() for _ in self.chars]
        for src, edges in enumerate(self.chars):
            for dst in edges.values():
                reverse[dst].add(src)
            wild = self.wildcard[src]
            if wild is not None:
                reverse[wild].add(src)
        live = set(self.accepting)
        frontier = list(self.accepting)
        while frontier:
            state = frontier.pop()
            for src in reverse[state]:
                if src not in live:
                    live.add(src)
                    frontier.append(src)
        return live


def _int_machine(builder: _Builder, entries: list[int], after_comma: int) -> None:
    """Attach the 0-100 integer sublanguage: ``0 | [1-9] | [1-9][0-9] | 100``."""
    zero = builder.new_state()
    one = builder.new_state()  # first digit 1: may extend to 1x or 100
    nonzero = builder.new_state()  # first digit 2-9
    ten = builder.new_state()  # "10": may extend to 100
    two_digit = builder.new_state()
    hundred = builder.new_state()
    for entry in entries:
        builder.edge(entry, "0", zero)
        builder.edge(entry, "1", one)
        for d in "23456789":
            builder.edge(entry, d, nonzero)
    builder.edge(one, "0", ten)
    for d in "123456789":
        builder.edge(one, d, two_digit)
    for d in _DIGITS:
        builder.edge(nonzero, d, two_digit)
    builder.edge(ten, "0", hundred)
    for state in (zero, one, nonzero, ten, two_digit, hundred):
        builder.edge(state, ",", after_comma)


def _string_machine(builder: _Builder, entries: list[int]) -> int:
    """Attach a JSON string: standard escapes, raw control characters rejected.

    Returns the state reached after the closing quote.
    """
    body = builder.new_state()
    closed = builder.new_state()
    escape = builder.new_state()
    for entry in entries:
        builder.edge(entry, '"', body)
    builder.edge(body, '"', closed)
    builder.edge(body, "\\", escape)
    builder.set_wildcard(body, body)
    for ch in _ESCAPABLE:
        builder.edge(escape, ch, body)
    hex_state = builder.new_state()
    builder.edge(escape, "u", hex_state)
    for _ in range(3):
        nxt = builder.new_state()
        for ch in _HEX:
            builder.edge(hex_state, ch, nxt)
        hex_state = nxt
    for ch in _HEX:
        builder.edge(hex_state, ch, body)
    return closed


def compile_schema(grammar: SchemaGrammar | None = None) -> CharAutomaton:
    """Compile the schema into a pruned, live-annotated DFA.

    The automaton accepts exactly the schema language; construction is
    deterministic, so state numbering is stable across runs.
    """
    grammar = grammar or SchemaGrammar()
    builder = _Builder()
    start = builder.new_state()

    after_colon = builder.literal(start, '{"' + grammar.score_key + '":')
    int_entries = [after_colon]
    if grammar.space_after_colon:
        spaced = builder.new_state()
        builder.edge(after_colon, " ", spaced)
        int_entries.append(spaced)

    after_comma = builder.new_state()
    _int_machine(builder, int_entries, after_comma)

    key_entries = [after_comma]
    if grammar.space_after_comma:
        spaced = builder.new_state()
        builder.edge(after_comma, " ", spaced)
        key_entries.append(spaced)
    key_start = builder.new_state()
    for entry in key_entries:
        builder.edge(entry, '"', key_start)
    after_colon2 = builder.literal(key_start, grammar.reason_key + '":')

    string_entries = [after_colon2]
    if grammar.space_after_colon:
        spaced = builder.new_state()
        builder.edge(after_colon2, " ", spaced)
        string_entries.append(spaced)
    closed = _string_machine(builder, string_entries)

    final = builder.new_state()
    builder.edge(closed, "}", final)
    builder.accepting.add(final)
    return builder.finish(start)
