import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colabel.dataset import (
    LabelledExample,
    export_dataset,
    read_export_jsonl,
    split_corpus,
    split_stats,
)
from colabel.errors import ValidationError


def corpus(n_total, n_positive, prefix="i"):
    out = []
    for i in range(n_total):
        positive = i < n_positive
        out.append(
            LabelledExample(
                id=f"{prefix}{i:06d}",
                text=f"text {i}",
                class_value=2 if positive else 0,
                binary=1 if positive else 0,
                flags=("vilification",) if positive else (),
            )
        )
    return out


class TestSplitCorpus:
    def test_large_corpus_counts(self):
        examples = corpus(10633, 134)
        train, test = split_corpus(examples, 4980 / 10633, seed=1)
        assert len(train) == 5653
        assert len(test) == 4980

    def test_second_corpus_counts(self):
        examples = corpus(8746, 704)
        train, test = split_corpus(examples, 4645 / 8746, seed=1)
        assert len(train) == 4101
        assert len(test) == 4645

    def test_partition(self):
        examples = corpus(100, 10)
        train, test = split_corpus(examples, 0.25, seed=3)
        ids = {e.id for e in examples}
        assert {e.id for e in train} | {e.id for e in test} == ids
        assert {e.id for e in train} & {e.id for e in test} == set()

    def test_deterministic(self):
        examples = corpus(60, 9)
        assert split_corpus(examples, 0.4, seed=8) == split_corpus(examples, 0.4, seed=8)

    def test_fraction_bounds(self):
        with pytest.raises(ValidationError):
            split_corpus(corpus(10, 2), 0.0, seed=1)
        with pytest.raises(ValidationError):
            split_corpus(corpus(10, 2), 1.0, seed=1)
        with pytest.raises(ValidationError):
            split_corpus([], 0.5, seed=1)

    @given(
        n_total=st.integers(4, 300),
        rate=st.floats(0.05, 0.5),
        fraction=st.floats(0.1, 0.9),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=100, deadline=None)
    def test_stratified_positive_counts_within_one(self, n_total, rate, fraction, seed):
        n_pos = max(1, int(n_total * rate))
        examples = corpus(n_total, n_pos)
        train, test = split_corpus(examples, fraction, seed=seed, stratified=True)
        test_pos = sum(e.binary for e in test)
        expected = fraction * n_pos
        assert abs(test_pos - expected) <= 1.0
        assert len(train) + len(test) == n_total

    def test_totals_always_sum(self):
        rng = random.Random(2)
        for _ in range(20):
            n = rng.randint(2, 200)
            examples = corpus(n, rng.randint(0, n))
            f = rng.uniform(0.05, 0.95)
            train, test = split_corpus(examples, f, seed=rng.randint(0, 99))
            report = split_stats({"train": train, "test": test})
            assert (
                report.rows["train"]["n_total"] + report.rows["test"]["n_total"] == n
            )


class TestSplitStats:
    def test_low_prevalence_rate(self):
        report = split_stats({"train": corpus(5653, 70)})
        row = report.rows["train"]
        assert row == {"n_total": 5653, "n_positive": 70, "positive_rate": 70 / 5653}
        assert row["positive_rate"] == pytest.approx(0.0124, abs=5e-4)

    def test_moderate_prevalence_rate(self):
        report = split_stats({"train": corpus(4101, 349)})
        assert report.rows["train"]["positive_rate"] == pytest.approx(0.0851, abs=5e-4)

    def test_empty_split_warns(self):
        report = split_stats({"test": []})
        assert report.rows["test"] == {"n_total": 0, "n_positive": 0, "positive_rate": 0.0}
        assert report.warnings

    def test_table_rendering(self):
        text = split_stats({"train": corpus(10, 2)}).to_table()
        assert "train" in text and "0.2000" in text


class TestExportDataset:
    def test_round_trip_two_items(self, tmp_path):
        examples = corpus(2, 1)
        export_dataset({"train": examples}, tmp_path)
        records = read_export_jsonl(tmp_path / "train.jsonl")
        assert len(records) == 2
        assert records[0] == {
            "id": "i000000",
            "text": "text 0",
            "class": 2,
            "binary": 1,
            "flags": ["vilification"],
            "split": "train",
        }

    def test_flags_omitted_when_disabled(self, tmp_path):
        export_dataset({"train": corpus(3, 1)}, tmp_path, include_flags=False)
        for rec in read_export_jsonl(tmp_path / "train.jsonl"):
            assert "flags" not in rec

    def test_byte_identical_re_export(self, tmp_path):
        examples = corpus(25, 5)
        export_dataset({"train": examples, "test": corpus(5, 1, "t")}, tmp_path / "one",
                       seed=42, test_fraction=0.2)
        export_dataset({"train": examples, "test": corpus(5, 1, "t")}, tmp_path / "two",
                       seed=42, test_fraction=0.2)
        for name in ("train.jsonl", "test.jsonl", "manifest.json"):
            assert (tmp_path / "one" / name).read_bytes() == (
                tmp_path / "two" / name
            ).read_bytes()

    def test_manifest_counts_and_hash(self, tmp_path):
        manifest = export_dataset({"train": corpus(7, 3)}, tmp_path, seed=9,
                                  test_fraction=0.3, stratified=False)
        entry = manifest["splits"]["train"]
        assert entry["n_records"] == 7
        assert entry["n_positive"] == 3
        assert len(entry["sha256"]) == 64
        on_disk = json.loads((tmp_path / "manifest.json").read_text())
        assert on_disk == manifest

    def test_csv_mirror(self, tmp_path):
        export_dataset({"train": corpus(2, 1)}, tmp_path, csv_mirror=True)
        lines = (tmp_path / "train.csv").read_text().strip().splitlines()
        assert lines[0] == "id,text,class,binary,flags,split"
        assert len(lines) == 3
