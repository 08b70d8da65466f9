"""Benchmarking prediction files against gold labels.

Covers the binary confusion matrix, per-class and macro precision/recall/F1
(macro F1 is the unweighted mean of the per-class F1s, never the F1 of macro
precision and recall), a keyword baseline classifier, multi-model comparison
reports, and epoch selection from a training log.
"""

from __future__ import annotations

import csv
import io
import json
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ConfigurationError, CoverageError, ValidationError

# Optional single-character foldings for the keyword normalizer; alef variants
# and similar letters that diacritic stripping alone does not unify.
ARABIC_LETTER_FOLDINGS: dict[str, str] = {
    "أ": "ا",  # alef with hamza above
    "إ": "ا",  # alef with hamza below
    "آ": "ا",  # alef with madda
    "ى": "ي",  # alef maqsura -> ya
    "ة": "ه",  # ta marbuta -> ha
}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_matrix(gold: Mapping[str, int], pred: Mapping[str, int]) -> ConfusionMatrix:
    """Count binary outcomes; prediction ids must cover the gold ids exactly."""
    missing = sorted(set(gold) - set(pred))
    extra = sorted(set(pred) - set(gold))
    if missing or extra:
        raise CoverageError(
            "prediction ids do not match gold ids",
            details={"missing": missing[:20], "extra": extra[:20],
                     "n_missing": len(missing), "n_extra": len(extra)},
        )
    tp = fp = fn = tn = 0
    for item_id, g in gold.items():
        p = pred[item_id]
        if g == 1 and p == 1:
            tp += 1
        elif g == 0 and p == 1:
            fp += 1
        elif g == 1 and p == 0:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision_positive: float
    recall_positive: float
    f1_positive: float
    precision_negative: float
    recall_negative: float
    f1_negative: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_positive": self.precision_positive,
            "recall_positive": self.recall_positive,
            "f1_positive": self.f1_positive,
            "precision_negative": self.precision_negative,
            "recall_negative": self.recall_negative,
            "f1_negative": self.f1_negative,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
        }


def _safe_div(num: float, den: float, warnings: list[str], what: str) -> float:
    if den == 0:
        warnings.append(f"zero division in {what}; defined as 0")
        return 0.0
    return num / den


def classification_metrics(matrix: ConfusionMatrix) -> Metrics:
    """Accuracy plus per-class and macro precision/recall/F1; 0/0 counts as 0."""
    if matrix.total < 1:
        raise ValidationError("empty confusion matrix")
    warnings: list[str] = []
    p_pos = _safe_div(matrix.tp, matrix.tp + matrix.fp, warnings, "positive precision")
    r_pos = _safe_div(matrix.tp, matrix.tp + matrix.fn, warnings, "positive recall")
    p_neg = _safe_div(matrix.tn, matrix.tn + matrix.fn, warnings, "negative precision")
    r_neg = _safe_div(matrix.tn, matrix.tn + matrix.fp, warnings, "negative recall")
    f1_pos = _safe_div(2 * p_pos * r_pos, p_pos + r_pos, warnings, "positive F1")
    f1_neg = _safe_div(2 * p_neg * r_neg, p_neg + r_neg, warnings, "negative F1")
    return Metrics(
        accuracy=(matrix.tp + matrix.tn) / matrix.total,
        precision_positive=p_pos,
        recall_positive=r_pos,
        f1_positive=f1_pos,
        precision_negative=p_neg,
        recall_negative=r_neg,
        f1_negative=f1_neg,
        precision_macro=(p_pos + p_neg) / 2.0,
        recall_macro=(r_pos + r_neg) / 2.0,
        f1_macro=(f1_pos + f1_neg) / 2.0,
        warnings=tuple(warnings),
    )


def normalize_text(
    text: str,
    mode: str = "casefold",
    extra_foldings: Optional[Mapping[str, str]] = None,
) -> str:
    """Normalization ladder for keyword matching.

    ``none`` leaves the text alone; ``casefold`` applies Unicode casefolding;
    ``casefold+diacritic-strip`` additionally removes combining marks after
    NFKD decomposition and applies any extra single-character foldings.
    """
    if mode == "none":
        return text
    if mode == "casefold":
        return text.casefold()
    if mode == "casefold+diacritic-strip":
        folded = text.casefold()
        stripped = "".join(
            ch for ch in unicodedata.normalize("NFKD", folded) if not unicodedata.combining(ch)
        )
        if extra_foldings:
            stripped = "".join(extra_foldings.get(ch, ch) for ch in stripped)
        return stripped
    raise ConfigurationError(f"unknown normalization mode: {mode!r}")


def keyword_classify(
    text: str,
    keywords: Sequence[str],
    normalization: str = "casefold",
    extra_foldings: Optional[Mapping[str, str]] = None,
) -> int:
    """1 if any normalized keyword occurs as a substring of the normalized text."""
    if not keywords:
        raise ConfigurationError("keyword list must not be empty")
    haystack = normalize_text(text, normalization, extra_foldings)
    for kw in keywords:
        if normalize_text(kw, normalization, extra_foldings) in haystack:
            return 1
    return 0


@dataclass
class PredictionSet:
    """One model's binary predictions keyed by item id."""

    model_name: str
    labels: dict[str, int]

    @classmethod
    def from_scores(
        cls, model_name: str, scores: Mapping[str, float], threshold: float = 0.5
    ) -> "PredictionSet":
        for item_id, score in scores.items():
            if not 0.0 <= score <= 1.0:
                raise ValidationError(f"score for {item_id} outside [0, 1]: {score}")
        return cls(model_name, {i: int(s >= threshold) for i, s in scores.items()})

    @classmethod
    def from_jsonl(cls, path, model_name: Optional[str] = None, threshold: float = 0.5) -> "PredictionSet":
        """Parse a prediction file of ``{"id", "label"}`` or ``{"id", "score"}`` lines."""
        name = model_name or str(path)
        labels: dict[str, int] = {}
        scores: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                item_id = str(rec["id"])
                if item_id in labels or item_id in scores:
                    raise ValidationError(f"{path}:{lineno}: duplicate prediction for {item_id}")
                if "label" in rec:
                    labels[item_id] = int(rec["label"])
                elif "score" in rec:
                    scores[item_id] = float(rec["score"])
                else:
                    raise ValidationError(f"{path}:{lineno}: need a 'label' or 'score' field")
        if scores:
            thresholded = cls.from_scores(name, scores, threshold)
            thresholded.labels.update(labels)
            return thresholded
        return cls(name, labels)


def read_gold_jsonl(path) -> dict[str, int]:
    """Read gold binary labels from a JSONL file ('label' or 'binary' field)."""
    gold: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            value = rec.get("label", rec.get("binary"))
            if value is None:
                raise ValidationError("gold records need a 'label' or 'binary' field")
            gold[str(rec["id"])] = int(value)
    return gold


REPORT_COLUMNS = (
    "model",
    "accuracy",
    "precision_positive",
    "recall_positive",
    "precision_macro",
    "recall_macro",
    "f1_macro",
)


@dataclass(frozen=True)
class ReportRow:
    model_name: str
    accuracy: float
    precision_positive: float
    recall_positive: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    source: str = "computed"  # "computed" | "reported"

    def cells(self) -> tuple:
        return (
            self.model_name,
            self.accuracy,
            self.precision_positive,
            self.recall_positive,
            self.precision_macro,
            self.recall_macro,
            self.f1_macro,
        )


@dataclass
class EvaluationReport:
    """Comparative model table, sorted by macro F1 descending."""

    rows: list[ReportRow]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "columns": list(REPORT_COLUMNS),
            "rows": [
                dict(zip(REPORT_COLUMNS, row.cells()), source=row.source)
                for row in self.rows
            ],
            "warnings": list(self.warnings),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS + ("source",))
        for row in self.rows:
            name, *metrics = row.cells()
            writer.writerow([name] + [f"{m:.6f}" for m in metrics] + [row.source])
        return buf.getvalue()

    def to_table(self) -> str:
        headers = ("Model", "Accuracy", "P (pos)", "R (pos)", "P (macro)", "R (macro)", "F1 (macro)")
        body = []
        for row in self.rows:
            name, *metrics = row.cells()
            tag = "" if row.source == "computed" else " [reported]"
            body.append([name + tag] + [f"{m:.3f}" for m in metrics])
        widths = [max(len(headers[i]), *(len(r[i]) for r in body)) if body else len(headers[i])
                  for i in range(len(headers))]
        def fmt(cells):
            return "  ".join(c.ljust(widths[i]) if i == 0 else c.rjust(widths[i])
                             for i, c in enumerate(cells))
        lines = [fmt(list(headers)), fmt(["-" * w for w in widths])]
        lines.extend(fmt(r) for r in body)
        return "\n".join(lines)


def metrics_row(model_name: str, metrics: Metrics, source: str = "computed") -> ReportRow:
    return ReportRow(
        model_name=model_name,
        accuracy=metrics.accuracy,
        precision_positive=metrics.precision_positive,
        recall_positive=metrics.recall_positive,
        precision_macro=metrics.precision_macro,
        recall_macro=metrics.recall_macro,
        f1_macro=metrics.f1_macro,
        source=source,
    )


def compare_models(
    gold: Mapping[str, int],
    prediction_sets: Iterable[PredictionSet],
    reported_rows: Sequence[ReportRow] = (),
) -> EvaluationReport:
    """Score every prediction set against the gold labels.

    Models failing coverage are excluded with a warning. ``reported_rows``
    attach externally published scores; they are tagged and never recomputed.
    """
    rows: list[ReportRow] = []
    warnings: list[str] = []
    for pset in prediction_sets:
        try:
            matrix = confusion_matrix(gold, pset.labels)
        except CoverageError as exc:
            warnings.append(f"{pset.model_name}: {exc} {exc.details}")
            continue
        rows.append(metrics_row(pset.model_name, classification_metrics(matrix)))
    for row in reported_rows:
        if row.source != "reported":
            raise ValidationError("attached rows must carry source='reported'")
        rows.append(row)
    rows.sort(key=lambda r: r.f1_macro, reverse=True)
    return EvaluationReport(rows=rows, warnings=warnings)


@dataclass(frozen=True)
class TrainingLogEntry:
    epoch: int
    training_loss: float
    validation_loss: float
    accuracy: float
    precision: float
    recall: float
    f1: float


def _check_log(log: Sequence[TrainingLogEntry]) -> Sequence[TrainingLogEntry]:
    if not log:
        raise ValidationError("training log is empty")
    if log[0].epoch != 1:
        raise ValidationError("training log must start at epoch 1")
    for prev, cur in zip(log, log[1:]):
        if cur.epoch <= prev.epoch:
            raise ValidationError("training log epochs must be strictly increasing")
    return log


def parse_training_log(text: str) -> list[TrainingLogEntry]:
    """Parse a training-log CSV (epoch, training/validation loss, accuracy,
    precision, recall, F1). A trailing ``*`` on an epoch number is ignored."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ValidationError("training log has no header row")
    renames = {name: name.strip().lower().replace(" ", "_") for name in reader.fieldnames}
    entries = []
    for raw in reader:
        row = {renames[k]: (v or "").strip() for k, v in raw.items() if k is not None}
        entries.append(
            TrainingLogEntry(
                epoch=int(row["epoch"].rstrip("*")),
                training_loss=float(row["training_loss"]),
                validation_loss=float(row["validation_loss"]),
                accuracy=float(row["accuracy"]),
                precision=float(row["precision"]),
                recall=float(row["recall"]),
                f1=float(row["f1"]),
            )
        )
    return list(_check_log(entries))


def select_epoch(log: Sequence[TrainingLogEntry], policy: str = "trajectory") -> int:
    """Pick the training epoch to keep.

    ``min-val-loss`` and ``max-f1`` are the obvious argmin/argmax. The
    ``trajectory`` policy scans epochs in order and halts at the first one
    where validation loss rose while F1 fell versus the previous epoch,
    returning that previous epoch; if that never happens the last epoch wins.
    """
    entries = list(_check_log(log))
    if policy == "min-val-loss":
        return min(entries, key=lambda e: e.validation_loss).epoch
    if policy == "max-f1":
        return max(entries, key=lambda e: e.f1).epoch
    if policy == "trajectory":
        for prev, cur in zip(entries, entries[1:]):
            if cur.validation_loss > prev.validation_loss and cur.f1 < prev.f1:
                return prev.epoch
        return entries[-1].epoch
    raise ConfigurationError(f"unknown epoch selection policy: {policy!r}")
