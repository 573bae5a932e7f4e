"""From schema to guaranteed-valid output: automaton, token masks, decoding.

The judge model must answer with exactly one JSON object shaped like
``{"score": <integer 0-100>, "reason": "<string>"}``. Instead of hoping the
model complies, the schema is compiled to a character automaton, the
automaton is lifted to per-state token masks for a concrete vocabulary, and
decoding only ever samples admissible tokens — so even pure noise decodes
to a valid verdict.

Run:  python3 demos/01_constrained_decoding.py
"""

import json

import numpy as np

from capjudge.grammar.automaton import SchemaGrammar, compile_schema
from capjudge.grammar.generate import DecodingParams, constrained_generate
from capjudge.grammar.masks import build_mask_index
from capjudge.vocab import synthetic_vocabulary


class NoiseLogits:
    """Uniform-random logits: a worst-case 'model' with no schema knowledge."""

    def __init__(self, size: int, seed: int):
        self.size = size
        self.rng = np.random.default_rng(seed)

    def logits(self, prefix_ids):
        return self.rng.uniform(-1.0, 1.0, self.size)


def main() -> None:
    grammar = SchemaGrammar()
    automaton = compile_schema(grammar)
    print("Verdict schema: {\"score\": <integer 0-100>, \"reason\": \"<string>\"}")
    print(
        f"Compiled to a {automaton.n_states}-state character automaton "
        f"(fingerprint {grammar.fingerprint()}).\n"
    )

    print("The automaton is the membership oracle for whole strings:")
    samples = [
        '{"score": 87, "reason": "close match"}',
        '{"score": 101, "reason": "out of range"}',
        '{"score": 55, "reason": "escaped \\"quote\\" is fine"}',
        '{"score": 07, "reason": "leading zero"}',
        '{"reason": "keys out of order", "score": 3}',
    ]
    for text in samples:
        verdict = "accepted" if automaton.accepts(text) else "rejected"
        print(f"  {verdict:8s}  {text}")

    vocab = synthetic_vocabulary(512, seed=7)
    fingerprint = grammar.fingerprint()
    index = build_mask_index(automaton, vocab, fingerprint)
    print(
        f"\nToken masks precomputed for a {vocab.size}-token vocabulary: "
        f"{len(index.states())} reachable states, one bitmask each."
    )

    state = automaton.start
    allowed = index.allowed_ids(state)
    preview = ", ".join(repr(vocab.tokens[i]) for i in allowed[:6])
    print(
        f"At the start state only {len(allowed)} of {vocab.size} tokens are "
        f"admissible (every one spells a prefix of the object), e.g. {preview}."
    )

    print("\nWalking one generation token by token:")
    state = automaton.start
    text = ""
    for piece in ('{"', "s", "c", "o", "r", "e", '":', " 10", ', "'):
        token_id = vocab.tokens.index(piece)
        assert index.contains(state, token_id)
        state = index.advance(state, token_id)
        text += piece
        print(
            f"  consumed {piece!r:6} -> state {state:2d}, "
            f"{len(index.allowed_ids(state)):3d} tokens admissible, "
            f"prefix so far: {text}"
        )
    print(f"  shortest legal completion from here: {index.shortest_completion(state)!r}")

    print("\nMasked argmax over pure noise still yields valid verdicts:")
    params = DecodingParams(temperature=0.0, max_tokens=600)
    for seed in range(3):
        out = constrained_generate(NoiseLogits(vocab.size, seed), index, params)
        payload = json.loads(out)
        print(f"  seed {seed}: {out!r}  (score={payload['score']})")

    print(
        "\nThe same index serializes to a single file (index.save / "
        "TokenMaskIndex.load) keyed by vocabulary digest and schema "
        "fingerprint, so it is built once per tokenizer and reused."
    )


if __name__ == "__main__":
    main()
