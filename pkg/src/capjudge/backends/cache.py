"""Content-addressed response cache with atomic publication.

Every model response is stored under a key derived purely from what
determines it: backend identity, prompt bytes, decoding parameters, and the
output-schema version. Records live one-per-file in a two-level digest-
prefix tree (``ab/cd/abcd….json``) and are written to a temporary file then
renamed into place, so concurrent writers race benignly — the last rename
wins with a byte-identical record — and no reader ever sees a partial file.
Each record embeds a digest of its own payload, verified on every read;
mismatches are counted and treated as a miss, never returned.

With a warm cache, replaying an evaluation performs zero network calls, and
on a cold run the number of network calls equals the number of cache misses
exactly.
"""

from __future__ import annotations

import json
import logging
import re
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..digests import canonical_json, sha256_hex
from ..errors import CapjudgeError, CorruptRecord, DomainError, MalformedVerdict
from ..grammar.generate import DecodingParams
from ..judge import parse_verdict
from .base import ChatBackend, EmbeddingBackend

logger = logging.getLogger(__name__)

#: Version of the verdict schema baked into cache keys; bump on any change
#: to the output contract so stale records can never be replayed.
SCHEMA_VERSION = "1"

_KEY_RE = re.compile(r"[0-9a-f]{64}")


def cache_key(
    backend_id: str,
    prompt: str,
    params: DecodingParams,
    schema_version: str = SCHEMA_VERSION,
) -> str:
    """Pure function of everything that determines a response."""
    return sha256_hex(
        canonical_json(
            {
                "backend_id": backend_id,
                "prompt": prompt,
                "params": params.to_dict(),
                "schema_version": schema_version,
            }
        )
    )


def embed_cache_key(backend_id: str, texts: Sequence[str]) -> str:
    return sha256_hex(
        canonical_json(
            {"backend_id": backend_id, "input": list(texts), "op": "embed"}
        )
    )


@dataclass(frozen=True)
class CacheRecord:
    """One immutable response record.

    ``verdict`` holds the parsed object when the raw output contained one;
    ``error`` marks calls that failed semantically (so replays re-raise
    instead of re-spending network budget). Exactly one of raw success /
    error marker is meaningful, and the digest covers the whole payload.
    """

    key: str
    backend_id: str
    raw_output: str
    verdict: dict | None
    error: str | None
    created_at: float
    token_counts: dict

    def payload(self) -> dict:
        return {
            "key": self.key,
            "backend_id": self.backend_id,
            "raw_output": self.raw_output,
            "verdict": self.verdict,
            "error": self.error,
            "created_at": self.created_at,
            "token_counts": self.token_counts,
        }

    def digest(self) -> str:
        return sha256_hex(canonical_json(self.payload()))

    def to_json(self) -> str:
        return canonical_json({"record": self.payload(), "digest": self.digest()})

    @classmethod
    def from_json(cls, text: str) -> "CacheRecord":
        try:
            wrapper = json.loads(text)
            record = cls(**wrapper["record"])
            stored = wrapper["digest"]
        except (ValueError, TypeError, KeyError) as exc:
            raise CorruptRecord(f"unreadable cache record: {exc}") from exc
        actual = record.digest()
        if stored != actual:
            raise CorruptRecord(
                "cache record digest mismatch", expected=actual, found=stored
            )
        return record


class ResponseCache:
    """Filesystem-backed record store; safe for concurrent readers/writers."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.corrupt_records = 0
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        if not _KEY_RE.fullmatch(key):
            raise ValueError(f"malformed cache key {key!r}")
        return self.root / key[:2] / key[2:4] / f"{key}.json"

    def lookup(self, key: str) -> CacheRecord | None:
        path = self._path(key)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        except OSError as exc:
            logger.warning("cache read failed for %s: %s", key, exc)
            return None
        try:
            record = CacheRecord.from_json(text)
        except CorruptRecord as exc:
            with self._lock:
                self.corrupt_records += 1
            logger.warning("ignoring corrupt cache record %s: %s", key, exc)
            return None
        if record.key != key:
            with self._lock:
                self.corrupt_records += 1
            logger.warning("cache record %s stored under wrong key", record.key)
            return None
        return record

    def store(self, record: CacheRecord) -> None:
        path = self._path(record.key)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = record.to_json().encode("utf-8")
        fd, tmp_name = tempfile.mkstemp(
            prefix=f".{record.key[:8]}.", suffix=".tmp", dir=path.parent
        )
        tmp = Path(tmp_name)
        try:
            with open(fd, "wb") as handle:
                handle.write(data)
            tmp.replace(path)
        except BaseException:
            tmp.unlink(missing_ok=True)
            raise

    def stats(self) -> dict:
        records = 0
        total_bytes = 0
        if self.root.is_dir():
            for path in self.root.rglob("*.json"):
                records += 1
                try:
                    total_bytes += path.stat().st_size
                except OSError:
                    pass
        return {
            "root": str(self.root),
            "records": records,
            "bytes": total_bytes,
            "corrupt_seen": self.corrupt_records,
        }

    def clear(self) -> int:
        removed = 0
        if self.root.is_dir():
            for path in self.root.rglob("*.json"):
                try:
                    path.unlink()
                    removed += 1
                except OSError:
                    pass
        return removed


def _usage_of(backend) -> dict:
    usage = getattr(backend, "last_call_usage", None)
    return dict(usage) if isinstance(usage, dict) else {}


class CachingChatBackend:
    """Wraps a chat backend with lookup-before-call semantics."""

    def __init__(
        self,
        inner: ChatBackend,
        cache: ResponseCache,
        schema_version: str = SCHEMA_VERSION,
    ):
        self.inner = inner
        self.cache = cache
        self.schema_version = schema_version
        self.backend_id = inner.backend_id
        self.strict_output = inner.strict_output
        self.is_network = inner.is_network
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    @property
    def network_calls(self) -> int:
        return self.misses if self.is_network else 0

    def stats(self) -> dict:
        with self._lock:
            return {
                "hits": self.hits,
                "misses": self.misses,
                "network_calls": self.network_calls,
            }

    def _record(
        self, key: str, raw_output: str, verdict: dict | None, error: str | None
    ) -> CacheRecord:
        return CacheRecord(
            key=key,
            backend_id=self.backend_id,
            raw_output=raw_output,
            verdict=verdict,
            error=error,
            created_at=time.time(),
            token_counts=_usage_of(self.inner),
        )

    def complete(self, prompt: str, params: DecodingParams) -> str:
        key = cache_key(self.backend_id, prompt, params, self.schema_version)
        record = self.cache.lookup(key)
        if record is not None:
            with self._lock:
                self.hits += 1
            if record.error is not None:
                raise MalformedVerdict(
                    f"replaying cached failure: {record.error}",
                    cache_key=key,
                    cached=True,
                )
            return record.raw_output
        with self._lock:
            self.misses += 1
        try:
            raw = self.inner.complete(prompt, params)
        except MalformedVerdict as exc:
            self.cache.store(
                self._record(key, "", None, f"{type(exc).__name__}: {exc}")
            )
            raise
        verdict_dict = None
        try:
            verdict = parse_verdict(raw, lenient=not self.strict_output)
            verdict_dict = {"score": verdict.score, "reason": verdict.reason}
        except CapjudgeError:
            verdict_dict = None
        self.cache.store(self._record(key, raw, verdict_dict, None))
        return raw


class CachingEmbeddingBackend:
    """Wraps an embedding backend; whole batches are cached as one record."""

    def __init__(self, inner: EmbeddingBackend, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.backend_id = inner.backend_id
        self.is_network = inner.is_network
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    @property
    def network_calls(self) -> int:
        return self.misses if self.is_network else 0

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise DomainError("embedding batch must be non-empty")
        key = embed_cache_key(self.backend_id, texts)
        record = self.cache.lookup(key)
        if record is not None:
            with self._lock:
                self.hits += 1
            vectors = json.loads(record.raw_output)["vectors"]
            return np.asarray(vectors, dtype=np.float64)
        with self._lock:
            self.misses += 1
        vectors = np.asarray(self.inner.embed(texts), dtype=np.float64)
        raw = canonical_json({"vectors": [list(map(float, row)) for row in vectors]})
        self.cache.store(
            CacheRecord(
                key=key,
                backend_id=self.backend_id,
                raw_output=raw,
                verdict=None,
                error=None,
                created_at=time.time(),
                token_counts=_usage_of(self.inner),
            )
        )
        return vectors
