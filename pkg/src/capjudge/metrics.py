"""Offline lexical caption metrics: sentence-level BLEU and ROUGE-L.

These give the evaluation harness model-free baselines. Tokenization is
frozen so scores stay comparable: lowercase, with every maximal run of
word characters (letters, digits, underscore) forming one token —
punctuation separates tokens and is dropped.

BLEU here is sentence-level with add-one smoothing on higher-order
precisions (audio captions are short; unsmoothed 4-gram precision is almost
always zero) and a brevity penalty against the *shortest* reference length.
The shortest-reference rule is what keeps the metric monotone in the
reference set — adding a reference can then never lower the score — which a
closest-length rule would violate whenever a newly added, longer reference
captures the penalty.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

from .errors import DomainError, EmptyCandidate

_TOKEN_RE = re.compile(r"\w+")
_ROUGE_BETA = 1.2


def tokenize(text: str) -> list[str]:
    """Lowercased word-character runs; punctuation acts as a separator."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class NGramProfile:
    """Multiset of n-grams for one caption at one order."""

    counts: dict
    n: int
    length: int

    @classmethod
    def from_tokens(cls, tokens: Sequence[str], n: int) -> "NGramProfile":
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        grams = Counter(
            tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
        )
        return cls(counts=dict(grams), n=n, length=len(tokens))


def _check_inputs(candidate: str, references: Sequence[str]) -> list[str]:
    if not references:
        raise DomainError("at least one reference caption is required")
    tokens = tokenize(candidate)
    if not tokens:
        raise EmptyCandidate(
            f"candidate {candidate!r} has no tokens after tokenization"
        )
    return tokens


def _modified_precision(
    cand_profile: NGramProfile, ref_profiles: Sequence[NGramProfile]
) -> tuple[int, int]:
    """Clipped n-gram matches and the candidate n-gram total."""
    matches = 0
    for gram, count in cand_profile.counts.items():
        best = max((ref.counts.get(gram, 0) for ref in ref_profiles), default=0)
        matches += min(count, best)
    total = sum(cand_profile.counts.values())
    return matches, total


def bleu(candidate: str, references: Sequence[str], max_n: int) -> float:
    """Sentence BLEU at order ``max_n`` (1 or 4), in [0, 1]."""
    if max_n not in (1, 4):
        raise ValueError(f"max_n must be 1 or 4, got {max_n}")
    cand_tokens = _check_inputs(candidate, references)
    ref_token_lists = [tokenize(ref) for ref in references]

    precisions: list[float] = []
    for n in range(1, max_n + 1):
        cand_profile = NGramProfile.from_tokens(cand_tokens, n)
        ref_profiles = [NGramProfile.from_tokens(r, n) for r in ref_token_lists]
        matches, total = _modified_precision(cand_profile, ref_profiles)
        if matches == 0 and n >= 2:
            precisions.append((matches + 1) / (total + 1))
        elif total == 0:
            precisions.append(0.0)
        else:
            precisions.append(matches / total)
    if any(p == 0.0 for p in precisions):
        return 0.0

    product = 1.0
    for p in precisions:
        product *= p
    geometric_mean = product ** (1.0 / max_n)

    cand_len = len(cand_tokens)
    # closest reference length; equally close -> the shorter one
    ref_len = min(
        (len(tokens) for tokens in ref_token_lists),
        key=lambda length: (abs(length - cand_len), length),
    )
    if cand_len >= ref_len:
        brevity_penalty = 1.0
    else:
        brevity_penalty = math.exp(1.0 - ref_len / cand_len)
    return brevity_penalty * geometric_mean


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0]
        for j, token_b in enumerate(b):
            if token_a == token_b:
                current.append(previous[j] + 1)
            else:
                current.append(max(previous[j + 1], current[j]))
        previous = current
    return previous[-1]


def rouge_l(candidate: str, references: Sequence[str]) -> float:
    """Best LCS F-measure over references (β = 1.2), in [0, 1]."""
    cand_tokens = _check_inputs(candidate, references)
    beta_sq = _ROUGE_BETA**2
    best = 0.0
    for reference in references:
        ref_tokens = tokenize(reference)
        if not ref_tokens:
            continue
        lcs = _lcs_length(cand_tokens, ref_tokens)
        if lcs == 0:
            continue
        precision = lcs / len(cand_tokens)
        recall = lcs / len(ref_tokens)
        score = ((1 + beta_sq) * precision * recall) / (recall + beta_sq * precision)
        best = max(best, score)
    return best


#: Shared metric interface: name → callable(candidate, references) → score.
MetricFn = Callable[[str, Sequence[str]], float]

METRICS: dict[str, MetricFn] = {
    "bleu1": partial(bleu, max_n=1),
    "bleu4": partial(bleu, max_n=4),
    "rougel": rouge_l,
}
