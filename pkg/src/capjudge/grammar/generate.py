"""Token-by-token generation constrained to the schema language.

Each step masks the model's logits with the precomputed bitset for the
current automaton state, picks a token (greedy argmax at temperature 0,
seeded softmax sampling otherwise), and advances the automaton by the chosen
token's characters. End-of-sequence is only ever admissible when the text
emitted so far is already a complete schema object, so every finished
generation parses.

If the token budget runs out mid-object, the shortest character suffix that
reaches acceptance is appended using single-character tokens; when the
vocabulary cannot spell that suffix, LengthExceeded is raised rather than
returning malformed output.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..errors import CapjudgeError, LengthExceeded, ModelFailure
from .masks import TokenMaskIndex


@dataclass(frozen=True)
class DecodingParams:
    """Decoding controls; hashable and serializable for cache keys."""

    temperature: float = 0.0
    max_tokens: int = 512
    seed: int = 0

    def __post_init__(self):
        if not (self.temperature >= 0.0):
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")

    def to_dict(self) -> dict:
        return asdict(self)


@runtime_checkable
class LogitSource(Protocol):
    """Anything that scores the next token given the generated prefix."""

    def logits(self, prefix_ids: Sequence[int]) -> np.ndarray: ...


def _next_logits(model: LogitSource, prefix: tuple[int, ...], size: int) -> np.ndarray:
    try:
        raw = model.logits(prefix)
    except CapjudgeError:
        raise
    except Exception as exc:
        raise ModelFailure(f"logit source failed: {exc}") from exc
    logits = np.asarray(raw, dtype=np.float64)
    if logits.shape != (size,):
        raise ModelFailure(
            f"expected logits of shape ({size},), got {logits.shape}",
            shape=tuple(logits.shape),
        )
    if np.isnan(logits).any():
        raise ModelFailure("logits contain NaN")
    return logits


def constrained_generate(
    model: LogitSource,
    index: TokenMaskIndex,
    params: DecodingParams | None = None,
) -> str:
    """Generate one complete schema object as text."""
    params = params or DecodingParams()
    vocab = index.vocab
    automaton = index.automaton
    rng = (
        np.random.default_rng(params.seed) if params.temperature > 0.0 else None
    )
    state = automaton.start
    pieces: list[str] = []
    prefix: tuple[int, ...] = ()

    for _ in range(params.max_tokens):
        logits = _next_logits(model, prefix, vocab.size)
        mask = index.sampling_mask(state)
        masked = np.where(mask, logits, -np.inf)
        if rng is None:
            token_id = int(np.argmax(masked))
            if masked[token_id] == -np.inf:
                raise ModelFailure(
                    "model assigned -inf to every admissible token",
                    state=state,
                )
        else:
            peak = masked.max()
            if peak == -np.inf:
                raise ModelFailure(
                    "model assigned -inf to every admissible token",
                    state=state,
                )
            with np.errstate(invalid="ignore"):
                probs = np.exp((masked - peak) / params.temperature)
            total = probs.sum()
            if not np.isfinite(total) or total <= 0.0:
                raise ModelFailure(
                    "model assigned zero probability to every admissible token",
                    state=state,
                )
            probs /= total
            token_id = int(rng.choice(vocab.size, p=probs))
        if token_id == vocab.eos_id:
            return "".join(pieces)
        state = index.advance(state, token_id)
        pieces.append(vocab.text(token_id))
        prefix = prefix + (token_id,)

    if automaton.is_accepting(state):
        return "".join(pieces)
    suffix = index.shortest_completion(state)
    single_chars = vocab.single_char_ids()
    if suffix is None or any(ch not in single_chars for ch in suffix):
        raise LengthExceeded(
            f"token budget of {params.max_tokens} exhausted at state {state} and "
            "the vocabulary cannot spell a closing suffix",
            state=state,
            max_tokens=params.max_tokens,
        )
    return "".join(pieces) + suffix
