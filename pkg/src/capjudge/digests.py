"""Canonical hashing helpers used by the cache, mocks, and reports."""

from __future__ import annotations

import hashlib
import json


def canonical_json(obj) -> str:
    """Serialize ``obj`` to a stable, whitespace-free JSON string."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def prompt_digest(prompt: str) -> str:
    """Digest used to key scripted mock responses and error forensics."""
    return sha256_hex(prompt)[:16]
