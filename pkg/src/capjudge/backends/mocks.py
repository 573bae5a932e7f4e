"""Deterministic stand-ins for models, usable offline.

Three logit-source behaviors cover the verification needs of constrained
generation: ``UniformLogits`` (all tokens equally likely — stress-tests that
masking alone keeps output well-formed), ``BiasedLogits`` (steers greedy
decoding toward a chosen target text — lets fixtures dictate scores), and
``ScriptedChatBackend`` (a prompt-digest → response table — replays recorded
remote transcripts without a network). ``MockEmbeddingBackend`` hashes each
text into a fixed unit vector.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Sequence

import numpy as np

from ..digests import prompt_digest
from ..errors import DomainError, ModelFailure
from ..grammar.generate import DecodingParams
from ..vocab import Vocabulary


class UniformLogits:
    """Scores every token identically; the grammar mask does all the work."""

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("vocabulary size must be positive")
        self.size = size

    def logits(self, prefix_ids: Sequence[int]) -> np.ndarray:
        return np.zeros(self.size, dtype=np.float64)


class BiasedLogits:
    """Pushes greedy decoding toward ``target`` and then toward stopping.

    Tokens that extend the generated text along ``target`` get a bonus that
    grows with how much of the target they cover, so argmax reproduces the
    target exactly (then stops via eos). Off-target prefixes fall back to
    uniform scores.
    """

    def __init__(self, vocab: Vocabulary, target: str, bonus: float = 100.0):
        self.vocab = vocab
        self.target = target
        self.bonus = bonus

    def logits(self, prefix_ids: Sequence[int]) -> np.ndarray:
        out = np.zeros(self.vocab.size, dtype=np.float64)
        current = "".join(self.vocab.text(i) for i in prefix_ids)
        if not self.target.startswith(current):
            return out
        remaining = self.target[len(current) :]
        if not remaining:
            out[self.vocab.eos_id] = self.bonus
            return out
        for token_id in range(self.vocab.size):
            if not self.vocab.mask_eligible(token_id):
                continue
            text = self.vocab.text(token_id)
            if remaining.startswith(text):
                out[token_id] = self.bonus + len(text)
        return out


class ScriptedChatBackend:
    """Replays fixed responses keyed by prompt digest.

    Response files are JSON: ``{"backend_id": ..., "responses": {digest:
    text}}``. Outputs are treated like remote transcripts (lenient parsing),
    so scripts may exercise prose-wrapped or malformed verdicts.
    """

    strict_output = False
    is_network = False

    def __init__(self, responses: dict[str, str], backend_id: str = "scripted"):
        self.backend_id = backend_id
        self.responses = dict(responses)
        self.calls = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedChatBackend":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if (
            not isinstance(payload, dict)
            or not isinstance(payload.get("responses"), dict)
        ):
            raise ModelFailure(
                f"script file {path} must be a JSON object with a 'responses' map"
            )
        return cls(
            responses=payload["responses"],
            backend_id=str(payload.get("backend_id", "scripted")),
        )

    def complete(self, prompt: str, params: DecodingParams) -> str:
        digest = prompt_digest(prompt)
        with self._lock:
            self.calls += 1
        response = self.responses.get(digest)
        if response is None:
            raise ModelFailure(
                f"no scripted response for prompt digest {digest}",
                prompt_digest=digest,
            )
        return response


class MockEmbeddingBackend:
    """Maps each text to a deterministic unit vector."""

    is_network = False

    def __init__(self, dimension: int = 32, backend_id: str = "mock-embed"):
        if dimension < 2:
            raise ValueError("embedding dimension must be at least 2")
        self.dimension = dimension
        self.backend_id = backend_id

    def _vector(self, text: str) -> np.ndarray:
        seed = int.from_bytes(
            hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big"
        )
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dimension)
        return vec / np.linalg.norm(vec)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise DomainError("embedding batch must be non-empty")
        return np.stack([self._vector(text) for text in texts])
