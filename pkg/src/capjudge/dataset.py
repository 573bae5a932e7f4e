"""Pairwise preference datasets: JSON-lines schema, digests, converters.

A dataset is one JSON object per line with fields ``id``, ``category`` (HC —
two correct human captions; HI — correct vs known-incorrect human; HM —
human vs machine; MM — two machine captions), ``references`` (non-empty
list), ``caption_a``, ``caption_b``, and ``preferred`` ("a" or "b").
Alongside each dataset a ``<name>.sha256`` sidecar pins the exact bytes, so
reports can prove which data they were computed on.

Published preference distributions ship as CSV in varying layouts, so the
converter takes an explicit column mapping with conventional defaults
rather than guessing a fixed format.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .digests import sha256_hex
from .errors import DatasetMismatch, EmptyDataset, ParseError, SchemaError

CATEGORIES = ("HC", "HI", "HM", "MM")


@dataclass(frozen=True)
class EvalPair:
    """One preference judgement: two captions, shared references, a winner."""

    id: str
    category: str
    references: tuple[str, ...]
    caption_a: str
    caption_b: str
    preferred: str

    @property
    def preferred_caption(self) -> str:
        return self.caption_a if self.preferred == "a" else self.caption_b

    @property
    def other_caption(self) -> str:
        return self.caption_b if self.preferred == "a" else self.caption_a

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "references": list(self.references),
            "caption_a": self.caption_a,
            "caption_b": self.caption_b,
            "preferred": self.preferred,
        }


def _pair_from_record(record: object, line: int) -> EvalPair:
    if not isinstance(record, dict):
        raise SchemaError(line, "record", "each line must be a JSON object")

    def _string(name: str) -> str:
        value = record.get(name)
        if not isinstance(value, str) or not value.strip():
            raise SchemaError(line, name, f"{name} must be a non-empty string")
        return value

    pair_id = _string("id")
    category = _string("category")
    if category not in CATEGORIES:
        raise SchemaError(
            line,
            "category",
            f"category must be one of {'/'.join(CATEGORIES)}, got {category!r}",
        )
    references = record.get("references")
    if not isinstance(references, list) or not references:
        raise SchemaError(line, "references", "references must be a non-empty list")
    for i, ref in enumerate(references):
        if not isinstance(ref, str) or not ref.strip():
            raise SchemaError(
                line, "references", f"reference {i} must be a non-empty string"
            )
    caption_a = _string("caption_a")
    caption_b = _string("caption_b")
    preferred = record.get("preferred")
    if preferred not in ("a", "b"):
        raise SchemaError(line, "preferred", "preferred must be 'a' or 'b'")
    extra = set(record) - {
        "id",
        "category",
        "references",
        "caption_a",
        "caption_b",
        "preferred",
    }
    if extra:
        raise SchemaError(
            line, sorted(extra)[0], f"unknown fields: {sorted(extra)}"
        )
    return EvalPair(
        id=pair_id,
        category=category,
        references=tuple(references),
        caption_a=caption_a,
        caption_b=caption_b,
        preferred=preferred,
    )


def dataset_digest(path: str | Path) -> str:
    return sha256_hex(Path(path).read_bytes())


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".sha256")


def write_sidecar(path: str | Path) -> Path:
    """Write ``<dataset>.sha256`` in sha256sum format; returns the sidecar."""
    path = Path(path)
    sidecar = sidecar_path(path)
    sidecar.write_text(f"{dataset_digest(path)}  {path.name}\n", encoding="utf-8")
    return sidecar


def _check_sidecar(path: Path) -> None:
    sidecar = sidecar_path(path)
    if not sidecar.is_file():
        return
    recorded = sidecar.read_text(encoding="utf-8").split()
    if not recorded:
        raise DatasetMismatch(f"sidecar {sidecar} is empty")
    actual = dataset_digest(path)
    if recorded[0] != actual:
        raise DatasetMismatch(
            f"dataset {path} does not match its sidecar digest",
            expected=recorded[0],
            found=actual,
        )


def load_dataset(path: str | Path, *, verify_digest: bool = True) -> list[EvalPair]:
    """Load and validate a JSON-lines dataset; errors carry line numbers."""
    path = Path(path)
    if verify_digest:
        _check_sidecar(path)
    pairs: list[EvalPair] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_number, f"invalid JSON: {exc.msg}") from exc
            pair = _pair_from_record(record, line_number)
            if pair.id in seen_ids:
                raise SchemaError(line_number, "id", f"duplicate pair id {pair.id!r}")
            seen_ids.add(pair.id)
            pairs.append(pair)
    if not pairs:
        raise EmptyDataset(f"{path} contains no records")
    return pairs


def save_dataset(pairs: Iterable[EvalPair], path: str | Path) -> Path:
    """Write pairs as JSON-lines plus the digest sidecar."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(json.dumps(pair.to_dict(), ensure_ascii=False) + "\n")
    write_sidecar(path)
    return path


@dataclass(frozen=True)
class CsvColumnMap:
    """How to read a preference CSV: column names and reference layout.

    ``reference_columns`` lists explicit columns; when empty, every column
    starting with ``reference_prefix`` is used in header order. ``preferred``
    cells accept a/b, 1/2, or the literal column names.
    """

    id_column: str | None = "id"
    category_column: str = "category"
    caption_a_column: str = "caption_a"
    caption_b_column: str = "caption_b"
    preferred_column: str = "preferred"
    reference_columns: tuple[str, ...] = ()
    reference_prefix: str = "reference"

    def resolve_references(self, headers: Sequence[str]) -> list[str]:
        if self.reference_columns:
            return list(self.reference_columns)
        return [h for h in headers if h.startswith(self.reference_prefix)]


_PREFERRED_ALIASES = {
    "a": "a",
    "b": "b",
    "1": "a",
    "2": "b",
    "caption_a": "a",
    "caption_b": "b",
}


def convert_csv(
    csv_path: str | Path,
    out_path: str | Path,
    *,
    columns: CsvColumnMap | None = None,
) -> int:
    """Convert a preference CSV into the canonical JSON-lines schema.

    Returns the number of pairs written; also writes the digest sidecar.
    """
    columns = columns or CsvColumnMap()
    csv_path = Path(csv_path)
    with open(csv_path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        headers = reader.fieldnames or []
        ref_columns = columns.resolve_references(headers)
        if not ref_columns:
            raise SchemaError(
                1, "references", f"no reference columns found in {headers}"
            )
        pairs: list[EvalPair] = []
        for row_number, row in enumerate(reader, start=2):
            references = [
                row[c].strip() for c in ref_columns if c in row and row[c].strip()
            ]
            preferred_raw = (row.get(columns.preferred_column) or "").strip().lower()
            preferred = _PREFERRED_ALIASES.get(preferred_raw)
            if preferred is None:
                raise SchemaError(
                    row_number,
                    columns.preferred_column,
                    f"cannot interpret preferred value {preferred_raw!r}",
                )
            pair_id = (
                row.get(columns.id_column, "").strip()
                if columns.id_column
                else ""
            ) or f"row-{row_number}"
            record = {
                "id": pair_id,
                "category": (row.get(columns.category_column) or "").strip(),
                "references": references,
                "caption_a": (row.get(columns.caption_a_column) or "").strip(),
                "caption_b": (row.get(columns.caption_b_column) or "").strip(),
                "preferred": preferred,
            }
            pairs.append(_pair_from_record(record, row_number))
    if not pairs:
        raise EmptyDataset(f"{csv_path} contains no data rows")
    save_dataset(pairs, out_path)
    return len(pairs)
