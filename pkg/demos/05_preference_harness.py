"""Pairwise preference evaluation: does a metric pick the caption people did?

A dataset is a list of (caption_a, caption_b, references, preferred) pairs
in four categories — HC (human correct vs human incorrect of the same
clip), HI (human vs irrelevant human), HM (human vs machine), MM (machine
vs machine). A metric scores both captions; it is correct when the one it
ranks higher is the one annotators preferred. Accuracy is pooled over
pairs (micro-average), per category and overall.

Run:  python3 demos/05_preference_harness.py
"""

import json
import tempfile
from pathlib import Path

from capjudge.dataset import EvalPair, dataset_digest, load_dataset, save_dataset
from capjudge.harness import (
    compare_runs,
    evaluate,
    load_report,
    render_comparison,
    render_table,
)
from capjudge.metrics import METRICS


PAIRS = [
    EvalPair("d1", "HC", ("a dog barks twice",), "a dog barks", "a dog sleeps", "a"),
    EvalPair("d2", "HC", ("rain falls steadily",), "heavy rain falls", "rain falls", "b"),
    EvalPair("d3", "HI", ("an engine idles",), "an engine idles nearby", "birds chirp at dawn", "a"),
    EvalPair("d4", "HI", ("a crowd cheers",), "applause and cheering", "a crowd cheers loudly", "b"),
    EvalPair("d5", "HM", ("wind howls outside",), "wind howls", "wind wind wind howls", "a"),
    EvalPair("d6", "MM", ("a bell rings once",), "a bell rings", "a bell rings once more", "b"),
    EvalPair("d7", "MM", ("water drips slowly",), "water drips", "water drops fall", "a"),
    EvalPair("d8", "MM", ("a door slams shut",), "a door slams", "a door closes hard", "a"),
]


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        dataset_path = save_dataset(PAIRS, tmp_path / "pairs.jsonl")
        pairs = load_dataset(dataset_path)
        digest = dataset_digest(dataset_path)
        print(
            f"Wrote and reloaded {len(pairs)} pairs; the sidecar digest "
            f"{digest[:16]}... pins the dataset so runs are comparable."
        )

        print("\nScoring with BLEU@1:")
        report = evaluate(
            METRICS["bleu1"], pairs, metric_id="bleu1", dataset_digest=digest
        )
        print(render_table(report))
        print(
            f"pooled: {report.total_correct}/{report.total} correct, "
            f"{report.total_ties} ties, accuracy {report.total_accuracy:.4f}"
        )
        print(
            "Exact metric ties count as incorrect by default "
            "(tie_policy='incorrect'); 'half' awards them 0.5."
        )

        report_path = tmp_path / "bleu1.json"
        report_path.write_text(report.to_json(), encoding="utf-8")
        print("\nReports serialize with a manifest. Keys of the saved file:")
        payload = json.loads(report_path.read_text(encoding="utf-8"))
        print(f"  {sorted(payload)}")
        print(
            "  manifest.config echoes the run settings; manifest_digest "
            "fingerprints the whole manifest for provenance."
        )

        second = evaluate(
            METRICS["rougel"], pairs, metric_id="rougel", dataset_digest=digest
        )
        (tmp_path / "rougel.json").write_text(second.to_json(), encoding="utf-8")
        delta = compare_runs(load_report(report_path), load_report(tmp_path / "rougel.json"))
        print("\nComparing two runs on the same dataset (bleu1 minus rougel):")
        print(render_comparison(delta))


if __name__ == "__main__":
    main()
