"""Pairwise preference evaluation: score both captions, count who wins.

A pair is correct when the metric gives the human-preferred caption a
strictly higher score. Equal scores are ties: under the default
``incorrect`` policy they earn nothing (conservative — ties carry no
information and must not inflate accuracy), under ``half`` they earn half
credit. Accuracies are reported per category and as a micro-average (all
pairs pooled); the raw integers are kept in the report so the identity
``total_accuracy * total = correct`` can be checked without float drift.

Metric errors abort only the affected pair and are listed in the manifest;
the run itself fails once more than ``failure_threshold`` of pairs error,
because partial results silently biased by dropped pairs would mislead.
Scoring is embarrassingly parallel; aggregation is a deterministic
reduction in input order, so reports are byte-stable for any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .dataset import CATEGORIES, EvalPair
from .digests import canonical_json, sha256_hex
from .errors import DatasetMismatch, MetricFailure
from .metrics import MetricFn

TIE_POLICIES = ("incorrect", "half")


@dataclass(frozen=True)
class CategoryStats:
    correct: int
    ties: int
    total: int
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "correct": self.correct,
            "ties": self.ties,
            "total": self.total,
            "accuracy": self.accuracy,
        }


@dataclass(frozen=True)
class CategoryReport:
    """Per-category and pooled accuracy plus the run manifest."""

    per_category: dict[str, CategoryStats]
    total_correct: int
    total_ties: int
    total: int
    total_accuracy: float
    tie_policy: str
    metric_id: str
    manifest: dict
    manifest_digest: str

    def to_dict(self) -> dict:
        return {
            "metric_id": self.metric_id,
            "tie_policy": self.tie_policy,
            "per_category": {
                category: self.per_category[category].to_dict()
                for category in CATEGORIES
            },
            "total_correct": self.total_correct,
            "total_ties": self.total_ties,
            "total": self.total,
            "total_accuracy": self.total_accuracy,
            "manifest": self.manifest,
            "manifest_digest": self.manifest_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, payload: dict) -> "CategoryReport":
        per_category = {
            category: CategoryStats(**payload["per_category"][category])
            for category in CATEGORIES
        }
        return cls(
            per_category=per_category,
            total_correct=payload["total_correct"],
            total_ties=payload["total_ties"],
            total=payload["total"],
            total_accuracy=payload["total_accuracy"],
            tie_policy=payload["tie_policy"],
            metric_id=payload["metric_id"],
            manifest=payload["manifest"],
            manifest_digest=payload["manifest_digest"],
        )

    @classmethod
    def from_json(cls, text: str) -> "CategoryReport":
        return cls.from_dict(json.loads(text))


def _accuracy(correct: int, ties: int, total: int, tie_policy: str) -> float:
    if total == 0:
        return 0.0
    if tie_policy == "half":
        return (correct + 0.5 * ties) / total
    return correct / total


def _score_pair(metric: MetricFn, pair: EvalPair) -> tuple[str, str | None]:
    """Returns (outcome, error): outcome in {correct, tie, incorrect, error}."""
    try:
        score_a = metric(pair.caption_a, pair.references)
        score_b = metric(pair.caption_b, pair.references)
    except Exception as exc:
        return "error", f"{type(exc).__name__}: {exc}"
    preferred, other = (
        (score_a, score_b) if pair.preferred == "a" else (score_b, score_a)
    )
    if preferred > other:
        return "correct", None
    if preferred == other:
        return "tie", None
    return "incorrect", None


def evaluate(
    metric: MetricFn,
    pairs: Sequence[EvalPair],
    *,
    metric_id: str = "custom",
    tie_policy: str = "incorrect",
    failure_threshold: float = 0.01,
    parallelism: int = 1,
    dataset_digest: str | None = None,
    config: dict | None = None,
    cache_stats: dict | Callable[[], dict] | None = None,
) -> CategoryReport:
    """Score every pair and aggregate into a CategoryReport.

    ``cache_stats`` may be a callable; it is invoked after scoring, so
    wrappers can report the hit/miss counts the run actually produced.
    """
    if tie_policy not in TIE_POLICIES:
        raise ValueError(
            f"tie_policy must be one of {TIE_POLICIES}, got {tie_policy!r}"
        )
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    if not pairs:
        raise ValueError("cannot evaluate an empty pair list")

    if parallelism == 1:
        outcomes = [_score_pair(metric, pair) for pair in pairs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(lambda p: _score_pair(metric, p), pairs))

    counts = {category: {"correct": 0, "ties": 0, "total": 0} for category in CATEGORIES}
    failures: list[dict] = []
    for pair, (outcome, error) in zip(pairs, outcomes):
        if outcome == "error":
            failures.append({"id": pair.id, "error": error})
            continue
        bucket = counts[pair.category]
        bucket["total"] += 1
        if outcome == "correct":
            bucket["correct"] += 1
        elif outcome == "tie":
            bucket["ties"] += 1

    if callable(cache_stats):
        cache_stats = cache_stats()
    failure_fraction = len(failures) / len(pairs)
    if failure_fraction > failure_threshold:
        raise MetricFailure(
            f"{len(failures)}/{len(pairs)} pairs failed "
            f"({failure_fraction:.1%} > {failure_threshold:.1%} threshold)",
            failures=failures[:20],
            failure_fraction=failure_fraction,
        )

    per_category = {
        category: CategoryStats(
            correct=bucket["correct"],
            ties=bucket["ties"],
            total=bucket["total"],
            accuracy=_accuracy(
                bucket["correct"], bucket["ties"], bucket["total"], tie_policy
            ),
        )
        for category, bucket in counts.items()
    }
    total_correct = sum(stats.correct for stats in per_category.values())
    total_ties = sum(stats.ties for stats in per_category.values())
    total = sum(stats.total for stats in per_category.values())
    total_accuracy = _accuracy(total_correct, total_ties, total, tie_policy)
    macro_average = sum(
        stats.accuracy for stats in per_category.values() if stats.total
    ) / max(sum(1 for stats in per_category.values() if stats.total), 1)

    manifest = {
        "dataset_digest": dataset_digest,
        "metric_id": metric_id,
        "tie_policy": tie_policy,
        "config": config or {},
        "cache": cache_stats or {},
        "pairs_total": len(pairs),
        "pairs_scored": total,
        "failures": failures,
        "failure_fraction": failure_fraction,
        "macro_average": macro_average,
    }
    return CategoryReport(
        per_category=per_category,
        total_correct=total_correct,
        total_ties=total_ties,
        total=total,
        total_accuracy=total_accuracy,
        tie_policy=tie_policy,
        metric_id=metric_id,
        manifest=manifest,
        manifest_digest=sha256_hex(canonical_json(manifest)),
    )


def render_table(report: CategoryReport) -> str:
    """Five-column accuracy table: HC HI HM MM All."""
    headers = [*CATEGORIES, "All"]
    values = [
        *(f"{report.per_category[c].accuracy:.4f}" for c in CATEGORIES),
        f"{report.total_accuracy:.4f}",
    ]
    width = max(len(cell) for cell in headers + values)
    header_row = "  ".join(h.rjust(width) for h in headers)
    value_row = "  ".join(v.rjust(width) for v in values)
    counts_row = "  ".join(
        f"{report.per_category[c].correct}/{report.per_category[c].total}".rjust(width)
        for c in CATEGORIES
    ) + "  " + f"{report.total_correct}/{report.total}".rjust(width)
    return "\n".join([header_row, value_row, counts_row])


def compare_runs(report_a: CategoryReport, report_b: CategoryReport) -> dict:
    """Per-category and total accuracy deltas (first minus second)."""
    digest_a = report_a.manifest.get("dataset_digest")
    digest_b = report_b.manifest.get("dataset_digest")
    if digest_a != digest_b:
        raise DatasetMismatch(
            "reports were computed on different datasets",
            digest_a=digest_a,
            digest_b=digest_b,
        )
    deltas = {
        category: report_a.per_category[category].accuracy
        - report_b.per_category[category].accuracy
        for category in CATEGORIES
    }
    return {
        "dataset_digest": digest_a,
        "metric_a": report_a.metric_id,
        "metric_b": report_b.metric_id,
        "per_category": deltas,
        "total": report_a.total_accuracy - report_b.total_accuracy,
    }


def render_comparison(delta: dict) -> str:
    headers = [*CATEGORIES, "All"]
    values = [
        *(f"{delta['per_category'][c]:+.4f}" for c in CATEGORIES),
        f"{delta['total']:+.4f}",
    ]
    width = max(len(cell) for cell in headers + values)
    return "\n".join(
        [
            "  ".join(h.rjust(width) for h in headers),
            "  ".join(v.rjust(width) for v in values),
        ]
    )


def load_report(path: str | Path) -> CategoryReport:
    return CategoryReport.from_json(Path(path).read_text(encoding="utf-8"))
