"""Benchmarking prediction files against a gold standard.

Builds a synthetic gold set, scores a keyword baseline and a noisy model
against it, attaches externally reported rows, and shows epoch selection
from a training log.
"""

import random

from colabel.evaluate import (
    PredictionSet,
    ReportRow,
    compare_models,
    keyword_classify,
    parse_training_log,
    select_epoch,
)

rng = random.Random(1)
keywords = ["vermin", "traitor"]

gold, texts = {}, {}
for n in range(500):
    item_id = f"t{n:04d}"
    positive = rng.random() < 0.1
    gold[item_id] = 1 if positive else 0
    if positive and rng.random() < 0.5:
        texts[item_id] = f"these {rng.choice(keywords)}s again, message {n}"
    else:
        texts[item_id] = f"everyday message number {n}"

keyword_preds = {i: keyword_classify(t, keywords, "casefold") for i, t in texts.items()}
noisy_preds = {i: (v if rng.random() < 0.9 else 1 - v) for i, v in gold.items()}

reported = [
    ReportRow("external-model-x", 0.90, 0.30, 0.27, 0.62, 0.60, 0.61, source="reported"),
]

report = compare_models(
    gold,
    [PredictionSet("keyword-baseline", keyword_preds), PredictionSet("noisy-model", noisy_preds)],
    reported_rows=reported,
)
print(report.to_table())

training_log = """\
Epoch,Training Loss,Validation Loss,Accuracy,Precision,Recall,F1
1,0.7539,0.9286,0.9247,0.4624,0.5000,0.4804
2,0.7688,0.6723,0.9247,0.4624,0.5000,0.4804
3,0.5976,0.9373,0.9281,0.8220,0.5361,0.5488
4,0.4941,0.9430,0.9292,0.7643,0.5915,0.6274
5,0.3664,0.9327,0.9202,0.7010,0.6415,0.6645
6,0.3199,1.0339,0.9213,0.6987,0.6079,0.6360
"""
log = parse_training_log(training_log)
print("\nepoch selection on the training log:")
for policy in ("trajectory", "min-val-loss", "max-f1"):
    print(f"  {policy:<13} -> epoch {select_epoch(log, policy)}")
