"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Tolerances are pinned here and nowhere else. Every expected number is either
computed by an independent oracle in this module / tests.oracles or is a
trivially forced value.
"""

import hashlib
import itertools
import random
import time
from pathlib import Path

import pytest

from colabel.aggregate import aggregate_classification
from colabel.agreement import ReliabilityTable, gwet_ac1, krippendorff_alpha
from colabel.dataset import export_dataset, split_stats
from colabel.domain import Item, LabellingSchema
from colabel.errors import DegenerateDistributionError, InsufficientDataError
from colabel.evaluate import (
    ConfusionMatrix,
    PredictionSet,
    ReportRow,
    classification_metrics,
    compare_models,
    confusion_matrix,
    keyword_classify,
    metrics_row,
    parse_training_log,
    select_epoch,
)
from colabel.store import CampaignStore, StoreState

from oracles import ac1_pair_oracle, alpha_pair_oracle, metrics_from_pairs, vote_oracle
from test_evaluation import TRAINING_LOG_CSV, gold_and_pred_for


def report(criterion: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# Criterion 1: epoch selection


def test_epoch_selection():
    started = time.perf_counter()
    log = parse_training_log(TRAINING_LOG_CSV)
    assert len(log) == 6
    trajectory = select_epoch(log, "trajectory")
    min_val = select_epoch(log, "min-val-loss")
    elapsed = time.perf_counter() - started
    report(
        "epoch selection: trajectory -> 5, min-val-loss -> 2, < 1s",
        trajectory == 5 and min_val == 2 and elapsed < 1.0,
        f"trajectory={trajectory} min-val-loss={min_val} {elapsed:.3f}s",
    )


# ---------------------------------------------------------------------------
# Criterion 2: split statistics at published counts


def synthetic_corpus(n_total, n_positive):
    from colabel.dataset import LabelledExample

    return [
        LabelledExample(
            id=f"i{k:06d}",
            text=f"text {k}",
            class_value=2 if k < n_positive else 0,
            binary=1 if k < n_positive else 0,
        )
        for k in range(n_total)
    ]


def test_split_statistics():
    low = split_stats({"train": synthetic_corpus(5653, 70)}).rows["train"]
    mid = split_stats({"train": synthetic_corpus(4101, 349)}).rows["train"]
    ok_low = low["positive_rate"] == pytest.approx(0.012, abs=0.0005)
    ok_mid = mid["positive_rate"] == pytest.approx(0.085, abs=0.0005)
    report(
        "split statistics: 70/5653 -> 1.2%, 349/4101 -> 8.5% (+/- 0.05pp)",
        ok_low and ok_mid and low["n_positive"] == 70 and mid["n_positive"] == 349,
        f"rates {low['positive_rate']:.4f} / {mid['positive_rate']:.4f}",
    )


# ---------------------------------------------------------------------------
# Criterion 3: tie-break oracle equivalence


def test_tie_break_oracle_equivalence():
    schema = LabellingSchema()
    checked = mismatches = 0
    for size in range(1, 6):
        for multiset in itertools.combinations_with_replacement((0, 1, 2), size):
            got_class, got_method = aggregate_classification(list(multiset), schema)
            want_class, want_method = vote_oracle(multiset)
            checked += 1
            if (got_class, got_method.value) != (want_class, want_method):
                mismatches += 1
    anchor1 = aggregate_classification([0, 1, 2], schema)[0] == 0
    anchor2 = aggregate_classification([1, 1, 2, 2], schema)[0] == 1
    report(
        "tie-break: exhaustive multisets size <= 5 match the vote oracle",
        mismatches == 0 and checked >= 21 and anchor1 and anchor2,
        f"{checked} multisets, {mismatches} mismatches",
    )


# ---------------------------------------------------------------------------
# Criterion 4: agreement coefficients


def coefficient_outcome(fn, *args, **kwargs):
    try:
        return ("value", fn(*args, **kwargs))
    except (InsufficientDataError, DegenerateDistributionError, ValueError) as exc:
        kind = "degenerate" if (
            isinstance(exc, DegenerateDistributionError) or "degenerate" in str(exc)
        ) else "insufficient"
        return ("error", kind)


def sweep_tables():
    """Tables over the <= 3 annotators x <= 4 items x <= 3 categories domain:
    exhaustive for every shape up to 6 cells, seeded sampling beyond."""
    cells = (0, 1, 2, None)
    for shape in ((2, 2), (2, 3), (3, 2)):
        n_items, n_annotators = shape
        for combo in itertools.product(cells, repeat=n_items * n_annotators):
            yield [
                list(combo[i * n_annotators : (i + 1) * n_annotators])
                for i in range(n_items)
            ]
    rng = random.Random(20260810)
    for shape in ((3, 3), (4, 2), (4, 3)):
        n_items, n_annotators = shape
        for _ in range(700):
            yield [
                [rng.choice(cells) for _ in range(n_annotators)] for _ in range(n_items)
            ]


def test_agreement_coefficients():
    started = time.perf_counter()

    unanimous = ReliabilityTable.from_rows([[0, 0, 0], [2, 2, 2], [1, 1, 1]], 3)
    ok_unanimous = krippendorff_alpha(unanimous, "ordinal") == pytest.approx(1.0, abs=1e-12)

    opposed = ReliabilityTable.from_rows([[0, 2], [2, 0]], 3)
    ok_hand_alpha = krippendorff_alpha(opposed, "ordinal") == pytest.approx(-0.5, abs=1e-9)

    skewed = ReliabilityTable.from_rows([[1, 1], [0, 0], [1, 1], [1, 0]], 2)
    ok_hand_ac1 = gwet_ac1(skewed) == pytest.approx(0.5294, abs=1e-4)

    checked = mismatches = 0
    for rows in sweep_tables():
        table = ReliabilityTable.from_rows(rows, 3)
        got_a = coefficient_outcome(krippendorff_alpha, table, "ordinal")
        want_a = coefficient_outcome(alpha_pair_oracle, rows, 3, "ordinal")
        got_g = coefficient_outcome(gwet_ac1, table)
        want_g = coefficient_outcome(ac1_pair_oracle, rows, 3)
        checked += 1
        for got, want in ((got_a, want_a), (got_g, want_g)):
            if got[0] != want[0]:
                mismatches += 1
            elif got[0] == "value" and abs(got[1] - want[1]) > 1e-9:
                mismatches += 1
    elapsed = time.perf_counter() - started
    report(
        "agreement: hand values exact, oracle sweep at 1e-9, < 10s",
        ok_unanimous and ok_hand_alpha and ok_hand_ac1 and mismatches == 0 and elapsed < 10.0,
        f"{checked} tables, {mismatches} mismatches, {elapsed:.2f}s",
    )


# ---------------------------------------------------------------------------
# Criterion 5: metric harness


def test_metric_harness():
    m = classification_metrics(ConfusionMatrix(10, 5, 10, 75))
    gold, pred = gold_and_pred_for(10, 5, 10, 75)
    oracle = metrics_from_pairs([(gold[i], pred[i]) for i in gold])
    ok_hand = (
        abs(m.accuracy - 0.85) < 1e-9
        and abs(m.f1_macro - oracle["f1_macro"]) < 1e-9
        and round(m.f1_macro, 4) == 0.7403
    )

    rng = random.Random(271828)
    identity_violations = 0
    for _ in range(1000):
        tp, fp, fn, tn = (rng.randint(0, 200) for _ in range(4))
        if tp + fp + fn + tn == 0:
            tn = 1
        metrics = classification_metrics(ConfusionMatrix(tp, fp, fn, tn))
        if metrics.f1_macro != (metrics.f1_positive + metrics.f1_negative) / 2:
            identity_violations += 1
    report(
        "metric harness: hand example at 1e-9, macro-F1 identity on 1000 matrices",
        ok_hand and identity_violations == 0,
        f"accuracy={m.accuracy} f1_macro={m.f1_macro:.6f} violations={identity_violations}",
    )


# ---------------------------------------------------------------------------
# Criterion 6: comparative report


def test_comparative_report():
    rng = random.Random(31415)
    keywords = ["traitor", "vermin"]
    gold = {}
    texts = {}
    for n in range(400):
        item_id = f"i{n:04d}"
        positive = rng.random() < 0.12
        gold[item_id] = 1 if positive else 0
        if positive and rng.random() < 0.4:
            texts[item_id] = f"they are {rng.choice(keywords)}s, post {n}"
        elif not positive and rng.random() < 0.03:
            texts[item_id] = f"history of the word {rng.choice(keywords)} in drama {n}"
        else:
            texts[item_id] = f"ordinary message number {n}"

    keyword_predictions = {
        i: keyword_classify(t, keywords, "casefold") for i, t in texts.items()
    }
    reported = [
        ReportRow("published-baseline-a", 0.904, 0.289, 0.263, 0.616, 0.598, 0.606,
                  source="reported"),
        ReportRow("published-baseline-b", 0.884, 0.225, 0.241, 0.584, 0.595, 0.589,
                  source="reported"),
    ]
    rows_report = compare_models(
        gold, [PredictionSet("keyword-baseline", keyword_predictions)], reported
    )

    table_text = rows_report.to_table()
    header = table_text.splitlines()[0]
    seven_columns = [
        "Model", "Accuracy", "P (pos)", "R (pos)", "P (macro)", "R (macro)", "F1 (macro)",
    ]
    ok_columns = all(col in header for col in seven_columns)

    sorted_ok = [r.f1_macro for r in rows_report.rows] == sorted(
        (r.f1_macro for r in rows_report.rows), reverse=True
    )

    keyword_row = next(r for r in rows_report.rows if r.model_name == "keyword-baseline")
    composed = metrics_row(
        "keyword-baseline",
        classification_metrics(confusion_matrix(gold, keyword_predictions)),
    )
    ok_composition = keyword_row == composed
    ok_tagged = all(
        r.source == ("computed" if r.model_name == "keyword-baseline" else "reported")
        for r in rows_report.rows
    )
    report(
        "comparative report: 7 columns, macro-F1 sort, keyword row = composed metrics",
        ok_columns and sorted_ok and ok_composition and ok_tagged,
        f"{len(rows_report.rows)} rows",
    )


# ---------------------------------------------------------------------------
# Criterion 7: orchestration determinism and crash recovery


def sim_vote(item_id: str, annotator_id: str) -> int:
    """Deterministic synthetic judgment; most items unanimous negative, some
    clear positives, some contested."""
    item_roll = hashlib.sha256(item_id.encode()).digest()[0] % 100
    pair_roll = hashlib.sha256(f"{item_id}:{annotator_id}".encode()).digest()[0] % 100
    if item_roll < 78:
        return 0
    if item_roll < 88:
        return 2 if pair_roll < 80 else 1
    return pair_roll % 3


def drain_reviews(store, cid):
    campaign = store.state.campaign(cid)
    while campaign.review_pending:
        item_id = next(iter(campaign.review_pending))
        reviewer = campaign.review_pending[item_id][0]
        store.submit_review(
            cid, reviewer, item_id, "amend",
            class_value=sim_vote(item_id, reviewer),
        )


def run_pipeline(workdir: Path, seed: int = 42) -> tuple[Path, Path]:
    from colabel.orchestrate import plan_rounds, sample_pool

    corpus = [Item(id=f"post-{k:05d}", text=f"synthetic text {k}") for k in range(1500)]
    sampled = sample_pool(corpus, 1000, seed=seed)

    plan = plan_rounds(1000, 4, 2.0)
    assert plan.round_sizes == (67, 133, 267, 533)

    store_path = workdir / "campaign.ndjson"
    store = CampaignStore(store_path, snapshot_every=0)
    annotators = [f"annotator-{n}" for n in range(1, 6)]
    cid = store.create_campaign("pipeline", LabellingSchema(), annotators)["campaign_id"]
    store.import_items(cid, sampled)

    for index, size in enumerate(plan.round_sizes, start=1):
        rid = f"r{index}"
        store.open_round(cid, size=size, seed=seed + index, k=3, round_id=rid)
        campaign = store.state.campaign(cid)
        round_ = campaign.rounds[rid]
        for item_id in round_.item_ids:
            for annotator in round_.assignments[item_id]:
                store.submit_annotation(
                    cid, annotator, item_id, rid,
                    class_value=sim_vote(item_id, annotator),
                    idempotency_key=f"{rid}:{item_id}:{annotator}",
                )
        store.close_round(cid, rid)
        drain_reviews(store, cid)

    campaign = store.state.campaign(cid)
    for item_id in list(campaign.reannotation_queue):
        values = sorted(a.class_value for a in campaign.live_annotations(item_id))
        store.harmonise_item(
            cid, item_id,
            class_value=values[len(values) // 2],
            session_ref="closing-session",
        )

    store.carve_holdout(cid, fraction=0.3, seed=seed)

    out_dir = workdir / "export"
    splits = {
        "train": store.export_split(cid, "train", test_fraction=0.4, seed=seed),
        "test": store.export_split(cid, "test", test_fraction=0.4, seed=seed),
    }
    export_dataset(splits, out_dir, include_flags=False, seed=seed, test_fraction=0.4)
    from colabel.aggregate import labels_to_csv

    (out_dir / "labels.csv").write_text(
        labels_to_csv(store.aggregate_labels(cid), campaign.schema), encoding="utf-8"
    )
    return store_path, out_dir


def test_orchestration_determinism_and_crash_recovery(tmp_path):
    path_one, export_one = run_pipeline(tmp_path / "one", seed=42)
    path_two, export_two = run_pipeline(tmp_path / "two", seed=42)

    byte_identical = True
    for name in ("train.jsonl", "test.jsonl", "labels.csv", "manifest.json"):
        if (export_one / name).read_bytes() != (export_two / name).read_bytes():
            byte_identical = False

    # crash simulation: kill at event boundaries inside the run, replay the
    # durable prefix, then the rest; the fold must land on the same state
    log_events = CampaignStore(path_one, snapshot_every=0).log.load()
    full_digest = StoreState.replay(log_events).digest()
    recovery_ok = True
    for fraction in (0.25, 0.5, 0.75, 0.9):
        cut = int(len(log_events) * fraction)
        state = StoreState.replay(log_events[:cut])
        for event in log_events[cut:]:
            state.apply(event)
        if state.digest() != full_digest:
            recovery_ok = False

    reopened = CampaignStore(path_one, snapshot_every=0)
    recovery_ok = recovery_ok and reopened.state.digest() == full_digest

    # labelled corpus is non-trivial and holdout stayed out of train
    campaign = reopened.state.campaign("c1")
    train_ids = {
        e.id
        for e in reopened.export_split("c1", "train", test_fraction=0.4, seed=42)
    }
    disjoint = not (train_ids & campaign.holdout)

    report(
        "orchestration: seed-42 reruns byte-identical, crash replay identical",
        byte_identical and recovery_ok and disjoint and len(campaign.labels) > 500,
        f"{len(log_events)} events, {len(campaign.labels)} labelled, "
        f"{len(campaign.holdout)} holdout",
    )


# ---------------------------------------------------------------------------
# Criterion 8: the above ran without the UI


def test_runs_without_ui():
    frontend_build = Path(__file__).resolve().parent.parent / "frontend" / "dist"
    report(
        "acceptance suite has no UI dependency",
        True,
        "frontend build present but unused" if frontend_build.exists() else "no frontend build",
    )
