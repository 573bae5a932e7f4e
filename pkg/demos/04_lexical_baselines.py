"""Lexical baselines the judge is compared against: BLEU and ROUGE-L.

These are the classical n-gram metrics: cheap, deterministic, and blind to
meaning. They anchor the evaluation — any judge worth running has to beat
them on preference accuracy.

Run:  python3 demos/04_lexical_baselines.py
"""

from capjudge.metrics import METRICS, bleu, rouge_l, tokenize


def show(label: str, value: float) -> None:
    print(f"  {label:58s} {value:.4f}")


def main() -> None:
    print("Tokenization is lowercase word extraction:")
    print(f"  {tokenize('A dog Barks, twice!')!r}")

    print("\nAnchor points:")
    show('BLEU@1 "a dog barks" vs itself', bleu("a dog barks", ["a dog barks"], 1))
    show(
        'BLEU@1 "a dog barks" vs "rain falls hard"',
        bleu("a dog barks", ["rain falls hard"], 1),
    )
    show('BLEU@1 "a b c d" vs "a b x d" (3 of 4 unigrams)', bleu("a b c d", ["a b x d"], 1))

    print("\nClipping stops unigram stuffing:")
    show(
        'BLEU@1 "the the the the" vs "the cat sat"',
        bleu("the the the the", ["the cat sat"], 1),
    )

    print("\nBLEU@4 multiplies 1..4-gram precisions (add-one smoothing above 1-gram):")
    candidate = "a dog barks in the yard"
    references = ["a dog barks in the garden", "dogs barking outside"]
    show(f"BLEU@4 {candidate!r}", bleu(candidate, references, 4))

    print("\nThe brevity penalty punishes too-short candidates:")
    show('BLEU@1 "a dog" vs "a dog barks loudly"', bleu("a dog", ["a dog barks loudly"], 1))
    show('BLEU@1 "a dog barks loudly" vs same', bleu("a dog barks loudly", ["a dog barks loudly"], 1))

    print("\nROUGE-L scores the longest common subsequence (recall-leaning):")
    show('ROUGE-L "a dog barks" vs itself', rouge_l("a dog barks", ["a dog barks"]))
    show(
        'ROUGE-L "a dog barks loudly" vs "a dog quietly barks"',
        rouge_l("a dog barks loudly", ["a dog quietly barks"]),
    )
    show(
        "ROUGE-L takes the best reference of several",
        rouge_l("a dog barks", ["rain falls", "a dog barks"]),
    )

    print(f"\nRegistry for the harness and CLI: {sorted(METRICS)}")
    print("Every entry maps (candidate, references) -> float in [0, 1].")


if __name__ == "__main__":
    main()
