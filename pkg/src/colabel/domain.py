"""Core vocabulary for labelling campaigns.

A campaign is configured by a :class:`LabellingSchema` (an ordered
classification scale plus named feature flags), holds :class:`Item` texts,
and collects :class:`Annotation` judgments which are later condensed into
:class:`AggregateLabel` records. Everything here is an immutable value type
with pure validation helpers; no state is shared between calls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Mapping, Optional

from .errors import InvalidClassError, ValidationError

DEFAULT_SCALE: tuple[tuple[int, str], ...] = (
    (0, "Not"),
    (1, "Potentially"),
    (2, "Definitely"),
)


def utc_now() -> str:
    """Current UTC time as ISO-8601 with millisecond precision."""
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


class ReviewPolicy(str, Enum):
    """When an item is routed to the remaining annotators for review."""

    ANY_POSITIVE = "any-positive"
    AGGREGATE_POSITIVE = "aggregate-positive"


class BinaryLabel(int, Enum):
    """Two-way collapse of the classification scale used for evaluation."""

    NEGATIVE = 0
    POSITIVE = 1


class AggregationMethod(str, Enum):
    PLURALITY = "plurality"
    TIE_LOWER = "tie-lower"
    HARMONISED = "harmonised"
    REVIEW_CONFIRMED = "review-confirmed"


@dataclass(frozen=True)
class LabellingSchema:
    """Classification scale, flag set and routing policy for one campaign.

    The scale is an ordered list of ``(value, name)`` pairs whose values must
    be consecutive integers starting at 0. Class 0 is always the negative
    class for the binary collapse, whatever the scale size.
    """

    classification_scale: tuple[tuple[int, str], ...] = DEFAULT_SCALE
    flags: tuple[str, ...] = ()
    min_annotators_per_item: int = 3
    review_policy: ReviewPolicy = ReviewPolicy.ANY_POSITIVE
    high_disagreement_threshold: float = 0.5

    @property
    def class_values(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.classification_scale)

    @property
    def class_count(self) -> int:
        return len(self.classification_scale)

    def class_name(self, value: int) -> str:
        for v, name in self.classification_scale:
            if v == value:
                return name
        raise InvalidClassError(f"class value {value} not in scale")

    def to_dict(self) -> dict:
        return {
            "classification_scale": [
                {"value": v, "name": n} for v, n in self.classification_scale
            ],
            "flags": list(self.flags),
            "min_annotators_per_item": self.min_annotators_per_item,
            "review_policy": self.review_policy.value,
            "high_disagreement_threshold": self.high_disagreement_threshold,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LabellingSchema":
        scale = data.get("classification_scale")
        if scale is None:
            scale_t = DEFAULT_SCALE
        else:
            scale_t = tuple(
                (int(e["value"]), str(e["name"])) if isinstance(e, Mapping) else (int(e[0]), str(e[1]))
                for e in scale
            )
        return cls(
            classification_scale=scale_t,
            flags=tuple(data.get("flags", ())),
            min_annotators_per_item=int(data.get("min_annotators_per_item", 3)),
            review_policy=ReviewPolicy(data.get("review_policy", "any-positive")),
            high_disagreement_threshold=float(data.get("high_disagreement_threshold", 0.5)),
        )

    @classmethod
    def load(cls, path) -> "LabellingSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def validate_schema(schema: LabellingSchema) -> list[str]:
    """Return the list of violated schema invariants (empty means valid)."""
    errors: list[str] = []
    values = schema.class_values
    if len(values) < 2:
        errors.append("fewer than 2 classes")
    if list(values) != list(range(len(values))):
        errors.append("classification values must be consecutive integers starting at 0")
    seen: set[str] = set()
    for name in schema.flags:
        if not name:
            errors.append("empty flag name")
        elif name in seen:
            errors.append(f"duplicate flag: {name}")
        seen.add(name)
    if schema.min_annotators_per_item < 1:
        errors.append("min_annotators_per_item must be >= 1")
    if not 0.0 <= schema.high_disagreement_threshold <= 1.0:
        errors.append("high_disagreement_threshold must be within [0, 1]")
    return errors


def require_valid_schema(schema: LabellingSchema) -> LabellingSchema:
    errors = validate_schema(schema)
    if errors:
        raise ValidationError("invalid schema", details={"errors": errors})
    return schema


def collapse_binary(class_value: int, schema: LabellingSchema) -> BinaryLabel:
    """Collapse a scale value to positive/negative; class 0 is the sole negative."""
    if class_value not in schema.class_values:
        raise InvalidClassError(f"class value {class_value} not in scale")
    return BinaryLabel.NEGATIVE if class_value == 0 else BinaryLabel.POSITIVE


@dataclass(frozen=True)
class Item:
    """One opaque text to be labelled."""

    id: str
    text: str
    source_meta: Mapping[str, object] = field(default_factory=dict)
    pool_id: Optional[str] = None

    def validate(self) -> list[str]:
        errors = []
        if not self.id:
            errors.append("empty item id")
        if not self.text:
            errors.append("empty item text")
        return errors

    def to_record(self) -> dict:
        rec = {"id": self.id, "text": self.text, "meta": dict(self.source_meta)}
        if self.pool_id is not None:
            rec["pool_id"] = self.pool_id
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "Item":
        return cls(
            id=str(rec["id"]),
            text=str(rec["text"]),
            source_meta=dict(rec.get("meta", {})),
            pool_id=rec.get("pool_id"),
        )


def read_items_jsonl(path) -> list[Item]:
    """Read the one-record-per-line item import format."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            items.append(Item.from_record(rec))
    return items


@dataclass(frozen=True)
class Annotation:
    """One annotator's judgment on one item in one round.

    ``mark_for_review`` is a routing signal only; it never participates in
    agreement statistics or aggregation. ``superseded_by`` points at the
    annotation that replaced this one (re-annotation or harmonisation);
    a live annotation has it unset.
    """

    item_id: str
    annotator_id: str
    round_id: str
    class_value: int
    flags: frozenset[str] = frozenset()
    mark_for_review: bool = False
    submitted_at: str = ""
    annotation_id: Optional[str] = None
    superseded_by: Optional[str] = None

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "annotator_id": self.annotator_id,
            "round_id": self.round_id,
            "class_value": self.class_value,
            "flags": sorted(self.flags),
            "mark_for_review": self.mark_for_review,
            "submitted_at": self.submitted_at,
            "annotation_id": self.annotation_id,
            "superseded_by": self.superseded_by,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "Annotation":
        return cls(
            item_id=str(rec["item_id"]),
            annotator_id=str(rec["annotator_id"]),
            round_id=str(rec["round_id"]),
            class_value=int(rec["class_value"]),
            flags=frozenset(rec.get("flags", ())),
            mark_for_review=bool(rec.get("mark_for_review", False)),
            submitted_at=str(rec.get("submitted_at", "")),
            annotation_id=rec.get("annotation_id"),
            superseded_by=rec.get("superseded_by"),
        )


def validate_annotation(annotation: Annotation, schema: LabellingSchema) -> list[str]:
    """Return violated annotation invariants (empty means valid)."""
    errors = []
    if annotation.class_value not in schema.class_values:
        errors.append(f"class out of scale: {annotation.class_value}")
    undeclared = sorted(set(annotation.flags) - set(schema.flags))
    for name in undeclared:
        errors.append(f"undeclared flag: {name}")
    return errors


@dataclass(frozen=True)
class AggregateLabel:
    """Final per-item class with provenance."""

    item_id: str
    final_class: int
    method: AggregationMethod
    flag_consensus: frozenset[str] = frozenset()
    contributing_annotations: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "final_class": self.final_class,
            "method": self.method.value,
            "flag_consensus": sorted(self.flag_consensus),
            "contributing_annotations": list(self.contributing_annotations),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "AggregateLabel":
        return cls(
            item_id=str(rec["item_id"]),
            final_class=int(rec["final_class"]),
            method=AggregationMethod(rec["method"]),
            flag_consensus=frozenset(rec.get("flag_consensus", ())),
            contributing_annotations=tuple(rec.get("contributing_annotations", ())),
        )


def live_annotations(annotations: Iterable[Annotation]) -> list[Annotation]:
    return [a for a in annotations if a.superseded_by is None]
