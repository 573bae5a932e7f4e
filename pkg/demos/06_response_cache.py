"""The response cache: never pay for the same model call twice.

Every chat call is keyed by sha256 over (backend id, prompt, decoding
params, schema version). Records embed their own digest, writes are atomic
(temp file + rename), and corrupt or tampered records are ignored rather
than trusted. Semantic failures are cached too, so a known-bad prompt does
not burn retries on replay.

Run:  python3 demos/06_response_cache.py
"""

import logging
import sys
import tempfile
from pathlib import Path

from capjudge.backends.cache import (
    CachingChatBackend,
    ResponseCache,
    cache_key,
)
from capjudge.grammar.generate import DecodingParams


class CountingBackend:
    """Pretend network backend that counts how often it is actually called."""

    backend_id = "demo-remote"
    is_network = True
    strict_output = False

    def __init__(self):
        self.calls = 0

    def complete(self, prompt: str, params: DecodingParams) -> str:
        self.calls += 1
        return '{"score": 81, "reason": "served fresh"}'


def main() -> None:
    # surface the package's own warnings inline with the narration
    logging.basicConfig(
        level=logging.WARNING, format="  [log] %(message)s", stream=sys.stdout
    )
    params = DecodingParams(temperature=0.0, seed=0)
    key = cache_key("demo-remote", "judge this caption", params)
    print(f"Cache keys are pure functions of the request: {key[:24]}...")
    print("Changing any input changes the key:")
    for label, changed in [
        ("different prompt", cache_key("demo-remote", "judge THAT caption", params)),
        ("different seed", cache_key("demo-remote", "judge this caption", DecodingParams(temperature=0.0, seed=1))),
    ]:
        print(f"  {label:18s} -> {changed[:24]}...")

    with tempfile.TemporaryDirectory() as tmp:
        cache = ResponseCache(Path(tmp) / "cache")
        inner = CountingBackend()
        backend = CachingChatBackend(inner, cache)

        for round_number in (1, 2, 3):
            backend.complete("judge this caption", params)
            print(
                f"round {round_number}: inner backend called {inner.calls} "
                f"time(s), stats={backend.stats()}"
            )

        stored = cache.lookup(cache_key("demo-remote", "judge this caption", params))
        print(
            f"\nOn disk the record keeps full provenance: backend_id="
            f"{stored.backend_id!r}, verdict={stored.verdict}"
        )
        record_file = next(cache.root.rglob("*.json"))
        print(f"Layout is two-level sharded: {record_file.relative_to(cache.root)}")

        record_file.write_text(
            record_file.read_text(encoding="utf-8").replace("81", "99"),
            encoding="utf-8",
        )
        tampered = cache.lookup(
            cache_key("demo-remote", "judge this caption", params)
        )
        print(
            f"\nAfter tampering with the stored score the embedded digest no "
            f"longer matches: lookup -> {tampered}, "
            f"corrupt records seen = {cache.stats()['corrupt_seen']}"
        )
        print("A corrupt record is treated as a miss, never as data.")


if __name__ == "__main__":
    main()
