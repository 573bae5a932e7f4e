"""Tie-breakers: normalized (candidate, references) → [0, 1] signals.

Three families are provided. The random family hashes the caption content
into a uniform value, so "random" tie-breaking stays a pure function of the
input and the overall measure remains deterministic; a fixed-integer seed
mode reproduces genuinely random ablations (reproducible per run order, not
per input). The embedding family maps cosine similarity from [-1, 1] onto
[0, 1] affinely — a monotone map, so tie-break ordering is unchanged — and
aggregates over references by max (default: matching any one reference well
should not be diluted) or mean. The external family delegates to a scoring
service speaking a one-call HTTP contract, which is how a trained
caption-quality model can serve as the tie-breaker without being
reimplemented here.
"""

from __future__ import annotations

import hashlib
import logging
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np
import requests

from .backends.base import EmbeddingBackend
from .digests import canonical_json
from .errors import (
    CapjudgeError,
    ContractViolation,
    EmbeddingFailure,
    EndpointFailure,
    ZeroVector,
)
from .judge import CaptionInput, TieBreaker

logger = logging.getLogger(__name__)

_KINDS = frozenset({"none", "random", "embedding", "external"})
_AGGREGATIONS = frozenset({"max", "mean"})


@dataclass(frozen=True)
class TieBreakerConfig:
    """Which tie-breaker to use and its knobs; exactly one kind is active."""

    kind: str = "none"
    seed_policy: str | int = "content-hash"
    aggregation: str = "max"
    endpoint: str | None = None
    salt: int = 0
    timeout: float = 10.0
    retries: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {sorted(_KINDS)}, got {self.kind!r}")
        if self.aggregation not in _AGGREGATIONS:
            raise ValueError(
                f"aggregation must be one of {sorted(_AGGREGATIONS)}, "
                f"got {self.aggregation!r}"
            )
        if not (
            self.seed_policy == "content-hash"
            or (isinstance(self.seed_policy, int) and not isinstance(self.seed_policy, bool))
        ):
            raise ValueError(
                "seed_policy must be 'content-hash' or an integer, "
                f"got {self.seed_policy!r}"
            )
        if self.kind == "external" and not self.endpoint:
            raise ValueError("external tie-breaking requires an endpoint")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed_policy": self.seed_policy,
            "aggregation": self.aggregation,
            "endpoint": self.endpoint,
            "salt": self.salt,
        }


def _content_uniform(caption_input: CaptionInput, salt: int) -> float:
    payload = canonical_json(
        {
            "candidate": caption_input.candidate,
            "references": list(caption_input.references),
            "salt": salt,
        }
    )
    digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2**64


def gamma_random(
    caption_input: CaptionInput, config: TieBreakerConfig | None = None
) -> float:
    """Uniform [0, 1) value derived from the caption content and a salt."""
    config = config or TieBreakerConfig(kind="random")
    if config.seed_policy != "content-hash":
        raise ValueError(
            "gamma_random is the content-hash implementation; use "
            "make_tiebreaker for fixed-seed streams"
        )
    return _content_uniform(caption_input, config.salt)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("an embedding has zero norm; cosine is undefined")
    return float(np.clip(float(a @ b) / (norm_a * norm_b), -1.0, 1.0))


def gamma_embedding(
    caption_input: CaptionInput,
    backend: EmbeddingBackend,
    config: TieBreakerConfig | None = None,
) -> float:
    """Aggregated candidate-reference cosine, mapped onto [0, 1]."""
    config = config or TieBreakerConfig(kind="embedding")
    texts = [caption_input.candidate, *caption_input.references]
    try:
        vectors = np.asarray(backend.embed(texts), dtype=np.float64)
    except CapjudgeError:
        raise
    except Exception as exc:
        raise EmbeddingFailure(f"embedding backend failed: {exc}") from exc
    if vectors.shape[0] != len(texts):
        raise EmbeddingFailure(
            f"expected {len(texts)} vectors, got {vectors.shape[0]}"
        )
    candidate_vec = vectors[0]
    cosines = [
        1.0 if ref == caption_input.candidate else _cosine(candidate_vec, vec)
        for ref, vec in zip(caption_input.references, vectors[1:])
    ]
    aggregated = max(cosines) if config.aggregation == "max" else sum(cosines) / len(cosines)
    return (aggregated + 1.0) / 2.0


def gamma_external(
    caption_input: CaptionInput,
    endpoint: str,
    *,
    timeout: float = 10.0,
    retries: int = 1,
    session: requests.Session | None = None,
) -> float:
    """One POST to a scorer service; response score clamped into [0, 1]."""
    body = {
        "candidate": caption_input.candidate,
        "references": list(caption_input.references),
    }
    http = session or requests
    last_exc: Exception | None = None
    response = None
    for _ in range(max(retries, 0) + 1):
        try:
            response = http.post(endpoint, json=body, timeout=timeout)
        except requests.RequestException as exc:
            last_exc = exc
            continue
        break
    if response is None:
        raise EndpointFailure(
            f"scorer endpoint {endpoint} unreachable", endpoint=endpoint
        ) from last_exc
    if response.status_code >= 400:
        raise EndpointFailure(
            f"scorer endpoint {endpoint} returned HTTP {response.status_code}",
            endpoint=endpoint,
            status=response.status_code,
        )
    try:
        payload = response.json()
    except ValueError as exc:
        raise ContractViolation("scorer response is not JSON") from exc
    if not isinstance(payload, dict) or "score" not in payload:
        raise ContractViolation("scorer response must be an object with a score")
    score = payload["score"]
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise ContractViolation(
            f"scorer score must be numeric, got {type(score).__name__}"
        )
    value = float(score)
    if not np.isfinite(value):
        raise ContractViolation(f"scorer score must be finite, got {value}")
    if value < 0.0 or value > 1.0:
        clamped = min(max(value, 0.0), 1.0)
        logger.warning(
            "scorer returned %s outside [0, 1]; clamped to %s", value, clamped
        )
        return clamped
    return value


def make_tiebreaker(
    config: TieBreakerConfig,
    *,
    embed_backend: EmbeddingBackend | None = None,
    session: requests.Session | None = None,
) -> TieBreaker:
    """Bind a config (and its backends) into a (CaptionInput) -> float callable."""
    if config.kind == "none":
        return lambda caption_input: 0.0
    if config.kind == "random":
        if config.seed_policy == "content-hash":
            return lambda caption_input: _content_uniform(caption_input, config.salt)
        rng = np.random.default_rng(int(config.seed_policy))
        lock = threading.Lock()

        def _draw(caption_input: CaptionInput) -> float:
            with lock:
                return float(rng.random())

        return _draw
    if config.kind == "embedding":
        if embed_backend is None:
            raise ValueError("embedding tie-breaking requires an embedding backend")
        return lambda caption_input: gamma_embedding(
            caption_input, embed_backend, config
        )
    assert config.kind == "external"
    endpoint = config.endpoint
    assert endpoint is not None
    return lambda caption_input: gamma_external(
        caption_input,
        endpoint,
        timeout=config.timeout,
        retries=config.retries,
        session=session,
    )
