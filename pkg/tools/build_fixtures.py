#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures. Deterministic end to end.

Produces, under tests/fixtures/:

- vocab_bpe.json (+ vocab_bpe.config.json): a real byte-for-byte BPE
  vocabulary of >= 5000 tokens, trained with the `tokenizers` library on a
  synthetic audio-caption corpus (captions plus JSON verdict lines, so the
  vocabulary genuinely covers the judge's output schema). Training runs
  offline and is seeded, so rebuilding yields the same file.
- pairs.jsonl (+ .sha256): a 20-pair preference dataset across the four
  categories.
- responses.json: a scripted chat-backend response table keyed by prompt
  digest, covering every prompt the dataset produces, with a few
  prose-wrapped responses to exercise lenient parsing.
- golden_report.json: the frozen output of `capjudge eval` over those
  fixtures (staged under fixed file names in a scratch directory so the
  embedded config is path-independent).

Run from the repository root: python3 tools/build_fixtures.py
"""

from __future__ import annotations

import json
import random
import shutil
import sys
import tempfile
from pathlib import Path

from click.testing import CliRunner
from tokenizers import Regex, Tokenizer, models, pre_tokenizers, trainers

from capjudge.cli import main as cli_main
from capjudge.dataset import EvalPair, save_dataset
from capjudge.digests import prompt_digest
from capjudge.judge import CaptionInput, load_template, render_prompt
from capjudge.vocab import Vocabulary, save_vocabulary

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

SOURCES = [
    "rain", "a dog", "a car engine", "several birds", "strong wind", "a crowd",
    "thunder", "a freight train", "running water", "an alarm clock", "footsteps",
    "a wooden door", "soft music", "a baby", "ocean waves", "a diesel engine",
    "two people", "a church bell", "an old machine", "dry leaves", "a helicopter",
    "a motorcycle", "heavy rain", "a power drill", "a vacuum cleaner", "geese",
    "a telephone", "static noise", "a violin", "distant traffic", "a horse",
    "crickets", "a siren", "frying food", "a typewriter", "gravel", "a zipper",
    "fireworks", "a fountain", "chainsaw teeth",
]
VERB_STEMS = [
    "fall", "bark", "idle", "chirp", "blow", "cheer", "rumble", "pass", "drip",
    "ring", "echo", "creak", "play", "cry", "crash", "rev", "talk", "toll",
    "hum", "rustle", "click", "whir", "buzz", "splash", "squeak", "roar",
    "whistle", "clatter", "thump", "hiss", "pound", "scrape", "jingle",
    "murmur", "crackle", "drone", "patter", "screech", "slam", "gurgle",
]
VERB_SUFFIXES = ["s", "ed", "ing", "s softly", "s loudly", "s repeatedly"]
PLACES = [
    "on a tin roof", "in the street", "inside a garage", "among the trees",
    "across an open field", "in a packed stadium", "over the hills",
    "near a train station", "into a metal sink", "down a long hallway",
    "in an empty room", "inside an old house", "at a quiet cafe",
    "in the nursery", "along the shore", "in a busy workshop",
    "through a crowded market", "across the valley", "inside a factory",
    "behind the garden wall", "under a bridge", "on the highway",
    "near the harbor", "in a stairwell", "outside the window",
]
QUALIFIERS = [
    "in the distance", "continuously", "for a few seconds", "rhythmically",
    "very faintly", "then suddenly stops", "getting louder", "without pause",
    "over and over", "as people speak", "while wind blows", "in short bursts",
    "with a steady beat", "at a high pitch", "in the background",
]


NOUN_STEMS = [
    "sound", "noise", "tone", "hum", "roar", "click", "thud", "ring", "crash",
    "whine", "buzz", "chirp", "rattle", "drone", "echo", "rumble", "splash",
    "hiss", "knock", "beep", "horn", "bell", "drum", "motor", "engine", "wheel",
    "voice", "crowd", "storm", "wind", "wave", "stream", "brook", "leaf",
    "branch", "door", "floor", "glass", "metal", "plastic", "wood", "stone",
    "paper", "fabric", "chain", "spring", "gear", "blade", "pipe", "valve",
    "pump", "fan", "siren", "whistle", "guitar", "piano", "flute", "trumpet",
    "speaker", "record", "tape", "radio", "signal", "pulse", "beat", "rhythm",
    "melody", "chord", "note", "pitch", "timbre", "texture", "layer", "burst",
    "blast", "pop", "snap", "crack", "squeal", "groan", "moan", "howl", "yelp",
    "growl", "purr", "tweet", "caw", "quack", "honk", "neigh", "bleat", "moo",
    "oink", "croak", "trill", "warble", "chatter", "mutter", "whisper", "shout",
]
NOUN_SUFFIXES = ["", "s", "ing", "ed", "er", "ers", "y", "ier"]
ADJ_STEMS = [
    "loud", "soft", "sharp", "dull", "bright", "dark", "deep", "shallow",
    "quick", "slow", "steady", "shaky", "clean", "rough", "smooth", "harsh",
    "gentle", "heavy", "light", "thick", "thin", "clear", "muddy", "crisp",
    "fuzzy", "hollow", "solid", "tin", "bass", "treble", "metal", "wood",
    "glass", "damp", "dry", "wet", "cold", "warm", "rapid", "faint", "distant",
    "close", "steep", "flat", "broken", "whole", "sudden", "gradual", "even",
    "uneven", "rich", "plain", "muffled", "piercing", "booming", "ringing",
]
ADJ_SUFFIXES = ["", "ly", "er", "est", "ness", "ish"]


def word_bank() -> list[str]:
    words = set()
    for stem in NOUN_STEMS:
        for suffix in NOUN_SUFFIXES:
            words.add(stem + suffix)
    for stem in ADJ_STEMS:
        for suffix in ADJ_SUFFIXES:
            words.add(stem + suffix)
    for phrase in SOURCES + PLACES + QUALIFIERS:
        words.update(phrase.split())
    for stem in VERB_STEMS:
        for suffix in ("", "s", "ed", "ing"):
            words.add(stem + suffix)
    return sorted(words)


def caption(rng: random.Random) -> str:
    verb = rng.choice(VERB_STEMS) + rng.choice(VERB_SUFFIXES)
    parts = [rng.choice(SOURCES), verb, rng.choice(PLACES)]
    if rng.random() < 0.7:
        parts.append(rng.choice(QUALIFIERS))
    return " ".join(parts)


def corpus_lines(rng: random.Random, n: int) -> list[str]:
    words = word_bank()
    lines = []
    for i in range(n):
        if i % 3 == 0:
            text = caption(rng)
        else:
            text = " ".join(rng.choice(words) for _ in range(rng.randint(4, 9)))
        lines.append(text)
        if rng.random() < 0.5:
            lines.append(json.dumps({"score": rng.randint(0, 100), "reason": text}))
        if rng.random() < 0.1:
            lines.append(text.capitalize() + ".")
    return lines


def train_vocabulary(target_size: int = 5400) -> Vocabulary:
    rng = random.Random(20240817)
    lines = corpus_lines(rng, 60_000)
    tokenizer = Tokenizer(models.BPE())
    tokenizer.pre_tokenizer = pre_tokenizers.Split(
        Regex(r" ?\S+"), behavior="isolated"
    )
    trainer = trainers.BpeTrainer(
        vocab_size=target_size,
        special_tokens=["</s>"],
        initial_alphabet=[chr(c) for c in range(0x20, 0x7F)],
        show_progress=False,
    )
    tokenizer.train_from_iterator(lines, trainer)
    entries = tokenizer.get_vocab()
    vocab = Vocabulary.from_entries(entries, eos_token="</s>")
    if vocab.size < 5000:
        raise SystemExit(
            f"trained vocabulary has only {vocab.size} tokens; enrich the corpus"
        )
    return vocab


def build_vocab_fixture() -> None:
    vocab = train_vocabulary()
    save_vocabulary(vocab, FIXTURES / "vocab_bpe.json")
    print(f"vocab_bpe.json: {vocab.size} tokens, eos id {vocab.eos_id}")


def build_pairs(rng: random.Random) -> list[EvalPair]:
    pairs = []
    counter = 0
    for category in ("HC", "HI", "HM", "MM"):
        for _ in range(5):
            counter += 1
            refs = tuple(caption(rng) for _ in range(rng.randint(1, 3)))
            pairs.append(
                EvalPair(
                    id=f"pair-{counter:03d}",
                    category=category,
                    references=refs,
                    caption_a=caption(rng),
                    caption_b=caption(rng),
                    preferred=rng.choice(["a", "b"]),
                )
            )
    return pairs


def build_dataset_fixture() -> list[EvalPair]:
    rng = random.Random(1226)
    pairs = build_pairs(rng)
    save_dataset(pairs, FIXTURES / "pairs.jsonl")
    print(f"pairs.jsonl: {len(pairs)} pairs")
    return pairs


def build_responses_fixture(pairs: list[EvalPair]) -> None:
    rng = random.Random(3553)
    template = load_template("en")
    responses: dict[str, str] = {}
    reasons = [
        "describes the same sound events",
        "partially matches the references",
        "mentions an unrelated sound source",
        "matches the scene but not the action",
        "good grammar, wrong subject",
    ]
    for index, pair in enumerate(pairs):
        for caption_text in (pair.caption_a, pair.caption_b):
            prompt = render_prompt(
                template, CaptionInput(caption_text, pair.references)
            )
            digest = prompt_digest(prompt)
            if digest in responses:
                continue
            score = rng.randint(5, 95)
            if index % 5 == 4:
                score = 50  # force occasional exact ties within a pair
            verdict = json.dumps(
                {"score": score, "reason": rng.choice(reasons)}
            )
            if index % 7 == 3:
                verdict = f"Sure, here is my assessment:\n```json\n{verdict}\n```"
            responses[digest] = verdict
    payload = {"backend_id": "scripted-fixture", "responses": responses}
    (FIXTURES / "responses.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"responses.json: {len(responses)} scripted responses")


def run_eval_in_stage(stage: Path) -> tuple[int, str]:
    """Invoke `capjudge eval` inside ``stage`` with fixture-relative names."""
    for name in ("pairs.jsonl", "pairs.jsonl.sha256", "responses.json"):
        shutil.copy(FIXTURES / name, stage / name)
    runner = CliRunner()
    import os

    cwd = os.getcwd()
    os.chdir(stage)
    try:
        result = runner.invoke(
            cli_main,
            [
                "eval",
                "--dataset", "pairs.jsonl",
                "--metric", "clair_a",
                "--model", "scripted:responses.json",
                "--tiebreaker", "random",
                "--epsilon", "0.25",
                "--report", "report.json",
            ],
            catch_exceptions=False,
        )
    finally:
        os.chdir(cwd)
    return result.exit_code, (stage / "report.json").read_text(encoding="utf-8")


def build_golden_fixture() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        exit_code, report = run_eval_in_stage(Path(tmp))
    if exit_code != 0:
        raise SystemExit(f"eval failed with exit code {exit_code}")
    (FIXTURES / "golden_report.json").write_text(report, encoding="utf-8")
    print("golden_report.json written")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    only = sys.argv[1] if len(sys.argv) > 1 else None
    if only in (None, "vocab"):
        build_vocab_fixture()
    if only in (None, "dataset"):
        pairs = build_dataset_fixture()
        build_responses_fixture(pairs)
        build_golden_fixture()


if __name__ == "__main__":
    main()
