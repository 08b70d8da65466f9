"""Train/test splitting, split statistics and training-ready serialization.

Export files are newline-delimited JSON with a fixed field order and sorted
record order, so identical inputs always produce byte-identical files; the
manifest records seeds, fractions, counts and a content hash per split.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .domain import AggregateLabel, Item, LabellingSchema, collapse_binary
from .errors import ValidationError


@dataclass(frozen=True)
class LabelledExample:
    """One exportable record: an item joined with its aggregate label."""

    id: str
    text: str
    class_value: int
    binary: int
    flags: tuple[str, ...] = ()

    @classmethod
    def from_label(
        cls, item: Item, label: AggregateLabel, schema: LabellingSchema
    ) -> "LabelledExample":
        return cls(
            id=item.id,
            text=item.text,
            class_value=label.final_class,
            binary=int(collapse_binary(label.final_class, schema)),
            flags=tuple(sorted(label.flag_consensus)),
        )

    def to_record(self, split: str, include_flags: bool = True) -> dict:
        rec = {
            "id": self.id,
            "text": self.text,
            "class": self.class_value,
            "binary": self.binary,
        }
        if include_flags:
            rec["flags"] = list(self.flags)
        rec["split"] = split
        return rec


def split_corpus(
    corpus: Sequence[LabelledExample],
    test_fraction: float,
    seed: int,
    stratified: bool = False,
) -> tuple[list[LabelledExample], list[LabelledExample]]:
    """Disjoint, exhaustive train/test partition, deterministic given the seed.

    Stratified mode splits positives and negatives separately so each side's
    positive count is within one of exact proportionality.
    """
    if not corpus:
        raise ValidationError("cannot split an empty corpus")
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test fraction must lie strictly between 0 and 1")
    examples = sorted(corpus, key=lambda e: e.id)
    rng = random.Random(seed)
    if stratified:
        positives = [e for e in examples if e.binary == 1]
        negatives = [e for e in examples if e.binary == 0]
        n_test = int(math.floor(test_fraction * len(examples) + 0.5))
        n_test_pos = min(int(math.floor(test_fraction * len(positives) + 0.5)), n_test)
        rng.shuffle(positives)
        rng.shuffle(negatives)
        test = positives[:n_test_pos] + negatives[: n_test - n_test_pos]
        train = positives[n_test_pos:] + negatives[n_test - n_test_pos :]
    else:
        rng.shuffle(examples)
        n_test = int(math.floor(test_fraction * len(examples) + 0.5))
        test = examples[:n_test]
        train = examples[n_test:]
    return sorted(train, key=lambda e: e.id), sorted(test, key=lambda e: e.id)


@dataclass
class SplitReport:
    """Per-split totals, positive counts and positive rates."""

    rows: dict[str, dict]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"splits": self.rows, "warnings": list(self.warnings)}

    def to_table(self) -> str:
        header = f"{'split':<10} {'n_total':>8} {'n_positive':>11} {'positive_rate':>14}"
        lines = [header, "-" * len(header)]
        for name, row in self.rows.items():
            lines.append(
                f"{name:<10} {row['n_total']:>8} {row['n_positive']:>11} "
                f"{row['positive_rate']:>14.4f}"
            )
        return "\n".join(lines)


def split_stats(splits: dict[str, Sequence[LabelledExample]]) -> SplitReport:
    """Exact counts and positive rates for each split."""
    rows: dict[str, dict] = {}
    warnings: list[str] = []
    for name, examples in splits.items():
        total = len(examples)
        positive = sum(e.binary for e in examples)
        if total == 0:
            warnings.append(f"split {name!r} is empty; rate reported as 0")
            rate = 0.0
        else:
            rate = positive / total
        rows[name] = {"n_total": total, "n_positive": positive, "positive_rate": rate}
    return SplitReport(rows=rows, warnings=warnings)


def _jsonl(records: list[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n" for r in records)


def _csv_mirror(records: list[dict], include_flags: bool) -> str:
    cols = ["id", "text", "class", "binary"] + (["flags"] if include_flags else []) + ["split"]
    out = [",".join(cols)]
    for rec in records:
        cells = []
        for col in cols:
            value = rec[col]
            if col == "flags":
                value = ";".join(value)
            value = str(value)
            if any(ch in value for ch in ',"\n'):
                value = '"' + value.replace('"', '""') + '"'
            cells.append(value)
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def export_dataset(
    splits: dict[str, Sequence[LabelledExample]],
    out_dir,
    include_flags: bool = True,
    csv_mirror: bool = False,
    seed: Optional[int] = None,
    test_fraction: Optional[float] = None,
    stratified: Optional[bool] = None,
) -> dict:
    """Write one JSONL file per split plus a manifest; returns the manifest.

    Records are sorted by id and serialized with a fixed field order, so
    re-exporting unchanged inputs is byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "splits": {},
        "include_flags": include_flags,
    }
    if seed is not None:
        manifest["seed"] = seed
    if test_fraction is not None:
        manifest["test_fraction"] = test_fraction
    if stratified is not None:
        manifest["stratified"] = stratified
    for name in sorted(splits):
        examples = sorted(splits[name], key=lambda e: e.id)
        records = [e.to_record(name, include_flags) for e in examples]
        payload = _jsonl(records)
        path = out / f"{name}.jsonl"
        path.write_text(payload, encoding="utf-8")
        if csv_mirror:
            (out / f"{name}.csv").write_text(_csv_mirror(records, include_flags), encoding="utf-8")
        manifest["splits"][name] = {
            "path": path.name,
            "n_records": len(records),
            "n_positive": sum(e.binary for e in examples),
            "sha256": hashlib.sha256(payload.encode("utf-8")).hexdigest(),
        }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def read_export_jsonl(path) -> list[dict]:
    """Parse an exported split file back into records."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
