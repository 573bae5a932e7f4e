"""Tokenizer vocabularies: loading, validation, and synthetic generation.

A vocabulary is an ordered list of token strings with dense integer ids and a
single designated end-of-sequence token. The on-disk form is the common
tokenizer export: a JSON map ``{token_text: token_id}`` plus a small sidecar
config naming the eos token.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .digests import canonical_json, sha256_hex
from .errors import VocabularyError


@dataclass(frozen=True)
class Vocabulary:
    """Dense token-id to token-text mapping with one eos token.

    Tokens with empty text are special and never mask-eligible; the eos token
    is likewise excluded from masks and handled by the termination flag.
    """

    tokens: tuple[str, ...]
    eos_id: int

    def __post_init__(self):
        if not self.tokens:
            raise VocabularyError("vocabulary is empty")
        if not 0 <= self.eos_id < len(self.tokens):
            raise VocabularyError(f"eos id {self.eos_id} outside [0, {len(self.tokens)})")

    @property
    def size(self) -> int:
        return len(self.tokens)

    def text(self, token_id: int) -> str:
        return self.tokens[token_id]

    def mask_eligible(self, token_id: int) -> bool:
        return token_id != self.eos_id and bool(self.tokens[token_id])

    def single_char_ids(self) -> dict[str, int]:
        """Map each single-character token text to its (lowest) id."""
        out: dict[str, int] = {}
        for tid, text in enumerate(self.tokens):
            if len(text) == 1 and self.mask_eligible(tid) and text not in out:
                out[text] = tid
        return out

    def digest(self) -> str:
        payload = canonical_json({"tokens": list(self.tokens), "eos_id": self.eos_id})
        return sha256_hex(payload)

    @classmethod
    def from_entries(cls, entries: dict[str, int], eos_token: str) -> "Vocabulary":
        """Build from a ``{token_text: token_id}`` map, validating density."""
        if not entries:
            raise VocabularyError("vocabulary map is empty")
        size = len(entries)
        tokens: list[str | None] = [None] * size
        for text, tid in entries.items():
            if not isinstance(tid, int) or isinstance(tid, bool):
                raise VocabularyError(f"token {text!r} has non-integer id {tid!r}")
            if not 0 <= tid < size:
                raise VocabularyError(f"token id {tid} outside dense range [0, {size})")
            if tokens[tid] is not None:
                raise VocabularyError(f"duplicate token id {tid}")
            tokens[tid] = text
        if eos_token not in entries:
            raise VocabularyError(f"eos token {eos_token!r} not present in vocabulary")
        return cls(tokens=tuple(tokens), eos_id=entries[eos_token])  # type: ignore[arg-type]


def _sidecar_path(path: Path) -> Path:
    if path.suffix == ".json":
        return path.with_name(path.stem + ".config.json")
    return Path(str(path) + ".config.json")


def load_vocabulary(path: str | Path, eos_token: str | None = None) -> Vocabulary:
    """Load a JSON ``{token_text: token_id}`` export.

    The eos token is taken from ``eos_token`` when given, otherwise from the
    sidecar config ``<name>.config.json`` next to the vocabulary file.
    """
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise VocabularyError(f"cannot read vocabulary {path}: {exc}") from exc
    if not isinstance(entries, dict):
        raise VocabularyError(f"{path}: expected a JSON object mapping token text to id")
    if eos_token is None:
        sidecar = _sidecar_path(path)
        try:
            config = json.loads(sidecar.read_text(encoding="utf-8"))
        except OSError as exc:
            raise VocabularyError(
                f"no eos token given and sidecar config {sidecar} is missing"
            ) from exc
        except json.JSONDecodeError as exc:
            raise VocabularyError(f"sidecar config {sidecar} is not valid JSON") from exc
        eos_token = config.get("eos_token")
        if not isinstance(eos_token, str):
            raise VocabularyError(f"sidecar config {sidecar} lacks an 'eos_token' string")
    return Vocabulary.from_entries(entries, eos_token)


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    """Write the JSON map plus the eos sidecar config."""
    path = Path(path)
    entries = {text: tid for tid, text in enumerate(vocab.tokens)}
    path.write_text(
        json.dumps(entries, ensure_ascii=False, indent=0, sort_keys=False) + "\n",
        encoding="utf-8",
    )
    _sidecar_path(path).write_text(
        json.dumps({"eos_token": vocab.tokens[vocab.eos_id]}) + "\n", encoding="utf-8"
    )


_WORDS = (
    "a of rain water birds bird dog dogs people crowd wind thunder engine car cars "
    "traffic music song drum drums guitar piano bell bells horn siren alarm clock "
    "door doors footsteps walking running talking speaking voices voice man woman "
    "child children laughing crying shouting whistle whistling machine machines "
    "metal wood glass plastic paper leaves tree trees forest street road city town "
    "room kitchen bathroom outside inside background distance nearby loud quiet "
    "soft hard fast slow steady constant intermittent repeated single multiple "
    "several continuous short long high low pitched deep heavy light gentle strong "
    "splashing dripping pouring flowing rushing bubbling hissing buzzing humming "
    "ringing banging knocking tapping clicking ticking scraping squeaking rattling "
    "rumbling roaring barking meowing chirping singing tweeting crowing quacking "
    "mooing neighing followed while then and the is are with in on at by as it "
    "sound sounds noise noises audio clip recording plays playing heard hear can "
    "be being makes making made starts stops continues begins ends over under "
    "near far away close against through around some very quite"
).split()

_AFFIXES = ("ing", "ed", "er", "es", "ly", "tion", "ous", "un", "re", "pre", "dis")

_MERGES = (
    '{"', '"}', '",', '":', '": ', ', "', '"s', 's"', '."', '".',
    "...", "!!", "??", "--", "'s", "n't", ", ", ". ", "; ", ": ",
)


def synthetic_vocabulary(size: int, seed: int = 0, eos_token: str = "</s>") -> Vocabulary:
    """Deterministically generate a BPE-like vocabulary of exactly ``size`` tokens.

    The composition mirrors common subword vocabularies: full printable-ASCII
    single-character coverage, frequent words with and without a leading space,
    affix pieces, punctuation merges, and number tokens. Intended for tests,
    demos, and performance work when no real tokenizer export is at hand.
    """
    if size < 200:
        raise VocabularyError("synthetic vocabulary needs size >= 200 for full coverage")
    rng = random.Random(seed)
    seen: set[str] = set()
    tokens: list[str] = []

    def add(text: str) -> None:
        if text and text not in seen:
            seen.add(text)
            tokens.append(text)

    add(eos_token)
    for code in range(0x20, 0x7F):
        add(chr(code))
    for merge in _MERGES:
        add(merge)
    for n in range(0, 101):
        add(str(n))
        add(" " + str(n))
    for word in _WORDS:
        add(word)
        add(" " + word)
        add(word.capitalize())
    for affix in _AFFIXES:
        add(affix)
        add(" " + affix)
    letters = "abcdefghijklmnopqrstuvwxyz"
    while len(tokens) < size:
        kind = rng.random()
        if kind < 0.45:
            stem = rng.choice(_WORDS)
            add(" " + stem + rng.choice(_AFFIXES))
        elif kind < 0.8:
            piece = "".join(rng.choice(letters) for _ in range(rng.randint(2, 4)))
            add(piece if rng.random() < 0.5 else " " + piece)
        else:
            add(rng.choice(_WORDS) + " " + rng.choice(_WORDS))
    entries = {text: tid for tid, text in enumerate(tokens[:size])}
    if eos_token not in entries:
        raise VocabularyError("eos token displaced while trimming; increase size")
    return Vocabulary.from_entries(entries, eos_token)
