"""Chance-corrected inter-rater reliability and per-item disagreement.

Two corpus-level coefficients are provided:

* :func:`krippendorff_alpha` — ``1 - D_obs / D_exp`` over the coincidence
  matrix, with nominal / ordinal / interval distance weighting and pairwise
  handling of missing cells. Items with fewer than two ratings are excluded.
* :func:`gwet_ac1` — ``(P_a - P_e) / (1 - P_e)`` with Gwet's prevalence-robust
  chance estimator; used per feature flag where categories are binary.

Per-item routing uses :func:`item_disagreement`, the mean normalized pairwise
distance over the scored fields of an item's live annotations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .domain import Annotation, LabellingSchema, utc_now
from .errors import DegenerateDistributionError, InsufficientDataError, ValidationError

MISSING = -1

Metric = str  # "nominal" | "ordinal" | "interval"


@dataclass(frozen=True)
class ReliabilityTable:
    """Items x annotators rating matrix; ``MISSING`` marks absent cells."""

    values: np.ndarray
    category_count: int

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=int)
        if arr.ndim != 2:
            raise ValidationError("reliability table must be 2-dimensional")
        if self.category_count < 2:
            raise ValidationError("category_count must be >= 2")
        if arr.size and (arr.max(initial=MISSING) >= self.category_count or arr.min(initial=0) < MISSING):
            raise ValidationError(
                f"ratings must lie in [0, {self.category_count}) or be MISSING"
            )
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_rows(
        cls, rows: Sequence[Sequence[Optional[int]]], category_count: int
    ) -> "ReliabilityTable":
        """Build from per-item rating rows; ``None`` denotes a missing cell."""
        width = max((len(r) for r in rows), default=0)
        arr = np.full((len(rows), width), MISSING, dtype=int)
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                if v is not None:
                    arr[i, j] = int(v)
        return cls(values=arr, category_count=category_count)

    def category_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-item category tallies and per-item rating counts."""
        n_items = self.values.shape[0]
        counts = np.zeros((n_items, self.category_count), dtype=float)
        for q in range(self.category_count):
            counts[:, q] = (self.values == q).sum(axis=1)
        return counts, counts.sum(axis=1)


def _pairable_counts(table: ReliabilityTable) -> tuple[np.ndarray, np.ndarray]:
    counts, totals = table.category_counts()
    keep = totals >= 2
    if not keep.any():
        raise InsufficientDataError("no item has two or more ratings")
    return counts[keep], totals[keep]


def _distance_matrix(metric: Metric, marginals: np.ndarray) -> np.ndarray:
    q = marginals.shape[0]
    idx = np.arange(q)
    if metric == "nominal":
        return (idx[:, None] != idx[None, :]).astype(float)
    if metric == "interval":
        return (idx[:, None] - idx[None, :]).astype(float) ** 2
    if metric == "ordinal":
        # delta^2(c,k) = (sum_{g=c..k} n_g - (n_c + n_k) / 2)^2 over the
        # coincidence marginals n_g; zero on the diagonal by construction.
        cum = np.cumsum(marginals)
        lo = np.minimum(idx[:, None], idx[None, :])
        hi = np.maximum(idx[:, None], idx[None, :])
        between = cum[hi] - cum[lo] + marginals[lo]
        return (between - (marginals[idx[:, None]] + marginals[idx[None, :]]) / 2.0) ** 2
    raise ValidationError(f"unknown metric: {metric!r}")


def krippendorff_alpha(table: ReliabilityTable, metric: Metric = "ordinal") -> float:
    """Krippendorff's alpha over the coincidence-matrix formulation.

    Each item with ``m >= 2`` ratings contributes every ordered rating pair
    with weight ``1 / (m - 1)``, so missing cells never pair. Raises
    :class:`InsufficientDataError` when no item is pairable and
    :class:`DegenerateDistributionError` when fewer than two categories are
    observed (expected disagreement is zero and alpha is undefined).
    """
    counts, totals = _pairable_counts(table)
    weight = 1.0 / (totals - 1.0)
    coincidence = np.einsum("iq,ik,i->qk", counts, counts, weight)
    coincidence -= np.diag((counts * weight[:, None]).sum(axis=0))
    marginals = coincidence.sum(axis=1)
    n = marginals.sum()
    if np.count_nonzero(marginals) < 2:
        raise DegenerateDistributionError(
            "all pairable ratings fall in one category; alpha is undefined"
        )
    delta2 = _distance_matrix(metric, marginals)
    observed = float((coincidence * delta2).sum()) / n
    expected = float((np.outer(marginals, marginals) * delta2).sum()) / (n * (n - 1.0))
    return 1.0 - observed / expected


def gwet_ac1(table: ReliabilityTable) -> float:
    """Gwet's AC1 with categories treated as nominal.

    ``P_a`` is the mean per-item proportion of agreeing rating pairs;
    ``P_e = (1 / (Q - 1)) * sum_q pi_q (1 - pi_q)`` where ``pi_q`` is the mean
    per-item proportion of ratings in category ``q``. Items with fewer than
    two ratings are excluded from both terms.
    """
    counts, totals = _pairable_counts(table)
    per_item = (counts * (counts - 1.0)).sum(axis=1) / (totals * (totals - 1.0))
    attained = float(per_item.mean())
    pi = (counts / totals[:, None]).mean(axis=0)
    chance = float((pi * (1.0 - pi)).sum()) / (table.category_count - 1.0)
    if abs(1.0 - chance) < 1e-12:
        raise DegenerateDistributionError("chance agreement is 1; AC1 is undefined")
    return (attained - chance) / (1.0 - chance)


def item_disagreement(annotations: Sequence[Annotation], schema: LabellingSchema) -> float:
    """Mean normalized pairwise distance over an item's scored fields.

    Scored fields are the classification (distance ``|a - b| / (C - 1)``) and
    every flag asserted by at least one of the annotations (0/1 distance).
    Flags nobody asserted are skipped so that universal absence does not
    dilute classification disagreement. ``mark_for_review`` is never scored.
    """
    anns = list(annotations)
    if len(anns) < 2:
        raise InsufficientDataError("item disagreement needs at least 2 annotations")
    span = schema.class_count - 1
    active_flags = sorted({f for a in anns for f in a.flags})
    n_fields = 1 + len(active_flags)
    total = 0.0
    n_pairs = 0
    for i in range(len(anns)):
        for j in range(i + 1, len(anns)):
            a, b = anns[i], anns[j]
            dist = abs(a.class_value - b.class_value) / span
            for flag in active_flags:
                dist += (flag in a.flags) != (flag in b.flags)
            total += dist / n_fields
            n_pairs += 1
    return total / n_pairs


@dataclass(frozen=True)
class ItemScore:
    item_id: str
    score: float
    n_annotations: int
    marked_for_review: bool


@dataclass
class AgreementReport:
    """Corpus-level coefficients plus the per-item disagreement scores."""

    round_id: Optional[str]
    alpha_classification: Optional[float]
    ac1_per_flag: dict[str, Optional[float]]
    items: list[ItemScore]
    under_annotated: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    computed_at: str = ""

    @property
    def item_scores(self) -> dict[str, float]:
        return {row.item_id: row.score for row in self.items}

    def to_dict(self) -> dict:
        return {
            "round_id": self.round_id,
            "alpha_classification": self.alpha_classification,
            "ac1_per_flag": dict(self.ac1_per_flag),
            "items": [
                {
                    "item_id": row.item_id,
                    "score": row.score,
                    "n_annotations": row.n_annotations,
                    "marked_for_review": row.marked_for_review,
                }
                for row in self.items
            ],
            "under_annotated": list(self.under_annotated),
            "warnings": list(self.warnings),
            "computed_at": self.computed_at,
        }

    def to_items_csv(self) -> str:
        lines = ["item_id,score,n_annotations,marked_for_review"]
        for row in self.items:
            lines.append(
                f"{row.item_id},{row.score:.6f},{row.n_annotations},"
                f"{str(row.marked_for_review).lower()}"
            )
        return "\n".join(lines) + "\n"


def classification_table(
    annotations: Iterable[Annotation], schema: LabellingSchema
) -> tuple[ReliabilityTable, list[str], list[str]]:
    """Arrange annotations into an items x annotators class-value matrix."""
    by_item: dict[str, dict[str, Annotation]] = {}
    annotators: list[str] = []
    for ann in annotations:
        by_item.setdefault(ann.item_id, {})[ann.annotator_id] = ann
        if ann.annotator_id not in annotators:
            annotators.append(ann.annotator_id)
    item_ids = list(by_item)
    rows = [
        [by_item[i][a].class_value if a in by_item[i] else None for a in annotators]
        for i in item_ids
    ]
    table = ReliabilityTable.from_rows(rows, category_count=max(schema.class_count, 2))
    return table, item_ids, annotators


def flag_table(
    annotations: Iterable[Annotation], flag: str
) -> ReliabilityTable:
    """Binary presence/absence matrix for one flag (absence is category 0)."""
    by_item: dict[str, dict[str, int]] = {}
    annotators: list[str] = []
    for ann in annotations:
        by_item.setdefault(ann.item_id, {})[ann.annotator_id] = int(flag in ann.flags)
        if ann.annotator_id not in annotators:
            annotators.append(ann.annotator_id)
    rows = [
        [cells.get(a) for a in annotators] for cells in by_item.values()
    ]
    return ReliabilityTable.from_rows(rows, category_count=2)


def agreement_report(
    annotations: Iterable[Annotation],
    schema: LabellingSchema,
    round_id: Optional[str] = None,
    harmonised_items: frozenset[str] = frozenset(),
    computed_at: Optional[str] = None,
    include_superseded: bool = False,
) -> AgreementReport:
    """Compute the full per-round (or cumulative) agreement report.

    Coefficient failures (degenerate or insufficient data) become warnings
    rather than aborting the report. Items with fewer than two annotations
    are listed separately; harmonised items score 0 by construction since a
    single consensus record replaced their disagreeing annotations.
    ``include_superseded`` keeps harmonised-over and re-annotated records in
    the tables (the pre-harmonisation audit view).
    """
    anns = [a for a in annotations if include_superseded or a.superseded_by is None]
    warnings: list[str] = []

    alpha: Optional[float] = None
    if anns:
        table, _, _ = classification_table(anns, schema)
        try:
            alpha = krippendorff_alpha(table, metric="ordinal")
        except (InsufficientDataError, DegenerateDistributionError) as exc:
            warnings.append(f"alpha: {exc}")
    else:
        warnings.append("alpha: no annotations")

    ac1: dict[str, Optional[float]] = {}
    for flag in schema.flags:
        if not anns:
            ac1[flag] = None
            warnings.append(f"ac1[{flag}]: no annotations")
            continue
        try:
            ac1[flag] = gwet_ac1(flag_table(anns, flag))
        except (InsufficientDataError, DegenerateDistributionError) as exc:
            ac1[flag] = None
            warnings.append(f"ac1[{flag}]: {exc}")

    by_item: dict[str, list[Annotation]] = {}
    for ann in anns:
        by_item.setdefault(ann.item_id, []).append(ann)

    items: list[ItemScore] = []
    under: list[str] = []
    for item_id, group in by_item.items():
        marked = any(a.mark_for_review for a in group)
        if item_id in harmonised_items:
            items.append(ItemScore(item_id, 0.0, len(group), marked))
        elif len(group) >= 2:
            items.append(
                ItemScore(item_id, item_disagreement(group, schema), len(group), marked)
            )
        if len(group) < schema.min_annotators_per_item and item_id not in harmonised_items:
            under.append(item_id)
    items.sort(key=lambda row: row.item_id)
    under.sort()

    return AgreementReport(
        round_id=round_id,
        alpha_classification=alpha,
        ac1_per_flag=ac1,
        items=items,
        under_annotated=under,
        warnings=warnings,
        computed_at=computed_at if computed_at is not None else utc_now(),
    )
