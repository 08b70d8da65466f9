"""Condensing multiple annotations per item into a single label.

The tie rule is deliberately conservative: when two or more classes share the
maximal vote count the lowest of them wins, so aggregate positives are a
lower bound. The same stance extends to flags — a flag asserted by exactly
half of the annotators stays out of the consensus set.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

from .domain import (
    AggregateLabel,
    AggregationMethod,
    Annotation,
    LabellingSchema,
    ReviewPolicy,
)
from .errors import InvalidClassError, NoAnnotationsError


def aggregate_classification(
    class_values: Sequence[int], schema: LabellingSchema
) -> tuple[int, AggregationMethod]:
    """Strict plurality, else the minimum of the tied-top classes."""
    values = list(class_values)
    if not values:
        raise NoAnnotationsError("cannot aggregate an empty set of class values")
    scale = set(schema.class_values)
    for v in values:
        if v not in scale:
            raise InvalidClassError(f"class value {v} not in scale")
    tally = Counter(values)
    top = max(tally.values())
    winners = [v for v, c in tally.items() if c == top]
    if len(winners) == 1:
        return winners[0], AggregationMethod.PLURALITY
    return min(winners), AggregationMethod.TIE_LOWER


def aggregate_flags(
    annotations: Sequence[Annotation], schema: LabellingSchema
) -> frozenset[str]:
    """Flags asserted by strictly more than half of the live annotations."""
    anns = list(annotations)
    if not anns:
        raise NoAnnotationsError("cannot aggregate flags with no annotations")
    half = len(anns) / 2.0
    consensus = set()
    for flag in schema.flags:
        if sum(flag in a.flags for a in anns) > half:
            consensus.add(flag)
    return frozenset(consensus)


def review_candidates(
    annotations: Sequence[Annotation],
    policy: ReviewPolicy,
    schema: LabellingSchema,
) -> bool:
    """Whether an item is routed to the remaining annotators for review."""
    anns = list(annotations)
    if not anns:
        raise NoAnnotationsError("review routing needs at least one annotation")
    marked = any(a.mark_for_review for a in anns)
    if policy is ReviewPolicy.ANY_POSITIVE:
        return marked or any(a.class_value >= 1 for a in anns)
    final_class, _ = aggregate_classification([a.class_value for a in anns], schema)
    return marked or final_class >= 1


def aggregate_item(
    item_id: str,
    annotations: Sequence[Annotation],
    schema: LabellingSchema,
    reviewed: bool = False,
) -> AggregateLabel:
    """Build the full label for one item from its live annotations.

    ``reviewed`` upgrades a plurality outcome to review-confirmed when the
    contributing set includes broadcast-review judgments; ties keep the
    tie-lower provenance.
    """
    anns = list(annotations)
    final_class, method = aggregate_classification([a.class_value for a in anns], schema)
    if reviewed and method is AggregationMethod.PLURALITY:
        method = AggregationMethod.REVIEW_CONFIRMED
    contributing = [a.annotation_id for a in anns if a.annotation_id is not None]
    return AggregateLabel(
        item_id=item_id,
        final_class=final_class,
        method=method,
        flag_consensus=aggregate_flags(anns, schema),
        contributing_annotations=tuple(sorted(contributing, key=lambda a: (len(a), a))),
    )


def labels_to_csv(labels: Iterable[AggregateLabel], schema: LabellingSchema) -> str:
    """Aggregate-label export: item_id, final_class, binary_label, method, flags."""
    lines = ["item_id,final_class,binary_label,method,flags"]
    for label in labels:
        binary = 0 if label.final_class == 0 else 1
        flags = ";".join(sorted(label.flag_consensus))
        lines.append(
            f"{label.item_id},{label.final_class},{binary},{label.method.value},{flags}"
        )
    return "\n".join(lines) + "\n"
