"""Three interchangeable tie-breakers: content hash, embeddings, HTTP scorer.

The composite score adds ``epsilon * gamma`` where gamma is in [0, 1].
Three sources are available: a pure content-hash (deterministic, no
dependencies), reference-embedding cosine similarity, and an external HTTP
scorer. This script exercises all three offline — the HTTP one against a
throwaway local server.

Run:  python3 demos/03_tiebreakers.py
"""

import json
import statistics
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from capjudge.backends.mocks import MockEmbeddingBackend
from capjudge.judge import CaptionInput
from capjudge.tiebreak import (
    TieBreakerConfig,
    gamma_embedding,
    gamma_external,
    gamma_random,
)


def main() -> None:
    caption_input = CaptionInput(
        candidate="rain falls on a tin roof",
        references=("rain hitting a metal roof", "steady rainfall"),
    )

    print("1. Content-hash gamma: a pure function of candidate + references.")
    gamma = gamma_random(caption_input)
    print(f"   gamma = {gamma:.6f} (identical on every call, every machine)")
    salted = gamma_random(
        caption_input, TieBreakerConfig(kind="random", salt=1)
    )
    print(f"   changing the salt re-draws it: salt=1 -> {salted:.6f}")
    draws = [
        gamma_random(CaptionInput(f"caption variant {i}", ("r",)))
        for i in range(2000)
    ]
    print(
        f"   across 2000 distinct inputs the draws look uniform: "
        f"mean={statistics.fmean(draws):.4f}, min={min(draws):.4f}, "
        f"max={max(draws):.4f}"
    )

    print("\n2. Embedding gamma: cosine similarity against the references.")
    backend = MockEmbeddingBackend(dimension=16)
    config = TieBreakerConfig(kind="embedding", aggregation="max")
    gamma = gamma_embedding(caption_input, backend, config)
    print(f"   max over references: gamma = {gamma:.6f}")
    config = TieBreakerConfig(kind="embedding", aggregation="mean")
    gamma = gamma_embedding(caption_input, backend, config)
    print(f"   mean over references: gamma = {gamma:.6f}")
    exact = CaptionInput("steady rainfall", ("steady rainfall",))
    print(
        "   a candidate byte-identical to a reference short-circuits to "
        f"{gamma_embedding(exact, backend, config):.1f}"
    )

    print("\n3. External gamma: POST {candidate, references} to a scorer URL.")

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            request = json.loads(self.rfile.read(length))
            # toy scorer: reward shared words with the first reference
            shared = len(
                set(request["candidate"].split())
                & set(request["references"][0].split())
            )
            body = json.dumps({"score": min(1.0, shared / 4)}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        endpoint = f"http://127.0.0.1:{server.server_address[1]}"
        gamma = gamma_external(caption_input, endpoint)
        print(f"   scorer at {endpoint} returned gamma = {gamma:.6f}")
        print(
            "   (out-of-range scorer replies are clamped to [0, 1] with a "
            "logged warning; unreachable endpoints raise EndpointFailure)"
        )
    finally:
        server.shutdown()
        thread.join()


if __name__ == "__main__":
    main()
