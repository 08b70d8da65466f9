"""Durable campaign state as an append-only event log with a pure fold.

Every state change is an event written (and fsynced) to a newline-delimited
JSON log before it is acknowledged; materialized state is a deterministic
fold over the log, so replaying any prefix after a crash reproduces exactly
the state the uninterrupted run would have had. Snapshots are a cache to
speed up replay and are never authoritative.

All writes funnel through a single in-process lock; reads take the same lock
briefly and return copies, so the service can run many concurrent readers.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from . import orchestrate
from .aggregate import (
    aggregate_classification,
    aggregate_flags,
    aggregate_item,
    review_candidates,
)
from .agreement import agreement_report, item_disagreement
from .dataset import LabelledExample, split_corpus
from .domain import (
    AggregateLabel,
    AggregationMethod,
    Annotation,
    Item,
    LabellingSchema,
    ReviewPolicy,
    require_valid_schema,
    utc_now,
    validate_annotation,
)
from .errors import (
    ConflictError,
    CorruptLogError,
    InfeasibleError,
    RoundClosedError,
    UnknownEntityError,
    ValidationError,
)

EVENT_KINDS = (
    "campaign-created",
    "items-imported",
    "round-opened",
    "assignment-issued",
    "annotation-submitted",
    "review-submitted",
    "item-harmonised",
    "round-closed",
    "holdout-carved",
)

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Event:
    sequence: int
    kind: str
    payload: dict
    recorded_at: str

    def to_line(self) -> str:
        return json.dumps(
            {
                "sequence": self.sequence,
                "kind": self.kind,
                "payload": self.payload,
                "recorded_at": self.recorded_at,
            },
            ensure_ascii=False,
            separators=(",", ":"),
        )


class EventLog:
    """Append-only newline-delimited JSON event file."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._count = 0

    def load(self) -> list[Event]:
        """Read and validate the log; a torn trailing line is dropped."""
        events: list[Event] = []
        if not self.path.exists():
            self._count = 0
            return events
        raw = self.path.read_bytes()
        lines = raw.split(b"\n")
        trailing = lines.pop() if lines else b""
        good_bytes = 0
        for i, line in enumerate(lines):
            if not line.strip():
                good_bytes += len(line) + 1
                continue
            try:
                rec = json.loads(line.decode("utf-8"))
                event = Event(
                    sequence=int(rec["sequence"]),
                    kind=str(rec["kind"]),
                    payload=rec["payload"],
                    recorded_at=str(rec["recorded_at"]),
                )
            except (ValueError, KeyError) as exc:
                raise CorruptLogError(f"{self.path}: line {i + 1} is not a valid event: {exc}")
            expected = len(events) + 1
            if event.sequence != expected:
                raise CorruptLogError(
                    f"{self.path}: missing sequence number {expected} "
                    f"(found {event.sequence})",
                    details={"missing": expected, "found": event.sequence},
                )
            if event.kind not in EVENT_KINDS:
                raise CorruptLogError(f"{self.path}: unknown event kind {event.kind!r}")
            events.append(event)
            good_bytes += len(line) + 1
        if trailing.strip():
            # Torn write from a crash mid-append: keep the durable prefix.
            with open(self.path, "r+b") as fh:
                fh.truncate(good_bytes)
        self._count = len(events)
        return events

    def next_sequence(self) -> int:
        return self._count + 1

    def append(self, kind: str, payload: dict, recorded_at: str) -> Event:
        if kind not in EVENT_KINDS:
            raise ValidationError(f"unknown event kind {kind!r}")
        event = Event(self._count + 1, kind, payload, recorded_at)
        with open(self.path, "ab") as fh:
            fh.write(event.to_line().encode("utf-8") + b"\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._count += 1
        return event


# ---------------------------------------------------------------------------
# Materialized state


@dataclass
class Round:
    round_id: str
    index: int
    item_ids: list[str]
    from_queue: list[str]
    k: int
    seed: int
    assignments: dict[str, tuple[str, ...]] = field(default_factory=dict)
    closed: bool = False
    summary: Optional[dict] = None


@dataclass
class Campaign:
    campaign_id: str
    name: str
    schema: LabellingSchema
    annotators: list[str]
    annotator_tokens: dict[str, str]
    admin_token: str
    config: dict
    items: dict[str, Item] = field(default_factory=dict)
    rounds: dict[str, Round] = field(default_factory=dict)
    round_order: list[str] = field(default_factory=list)
    open_round_id: Optional[str] = None
    annotations: dict[str, Annotation] = field(default_factory=dict)
    live: dict[str, dict[str, str]] = field(default_factory=dict)
    round_subs: dict[str, dict[str, str]] = field(default_factory=dict)  # rid -> "item|annot" -> aid
    idempotency: dict[str, dict] = field(default_factory=dict)
    review_pending: dict[str, list[str]] = field(default_factory=dict)
    review_context: dict[str, dict] = field(default_factory=dict)
    reviewed_items: set[str] = field(default_factory=set)
    reannotation_queue: list[str] = field(default_factory=list)
    labels: dict[str, AggregateLabel] = field(default_factory=dict)
    harmonised: dict[str, int] = field(default_factory=dict)
    holdout: set[str] = field(default_factory=set)
    holdout_meta: Optional[dict] = None
    batched: set[str] = field(default_factory=set)

    # -- helpers ------------------------------------------------------------

    def live_annotations(self, item_id: str) -> list[Annotation]:
        ids = self.live.get(item_id, {}).values()
        return [self.annotations[aid] for aid in sorted(ids, key=lambda a: (len(a), a))]

    def all_live(self) -> list[Annotation]:
        return [
            self.annotations[aid]
            for per_item in self.live.values()
            for aid in per_item.values()
        ]

    def round_annotations(self, round_id: str) -> list[Annotation]:
        return [self.annotations[aid] for aid in self.round_subs.get(round_id, {}).values()]

    def item_score(self, item_id: str) -> float:
        """Current disagreement for one item; harmonised items score 0."""
        if item_id in self.harmonised:
            return 0.0
        return item_disagreement(self.live_annotations(item_id), self.schema)

    def provisional_label(self, item_id: str) -> dict:
        anns = self.live_annotations(item_id)
        final_class, _ = aggregate_classification([a.class_value for a in anns], self.schema)
        flags = aggregate_flags(anns, self.schema)
        return {"class_value": final_class, "flags": sorted(flags)}


def _sub_key(item_id: str, annotator_id: str) -> str:
    return f"{item_id}|{annotator_id}"


class StoreState:
    """Pure fold over an event sequence."""

    def __init__(self):
        self.campaigns: dict[str, Campaign] = {}
        self.tokens: dict[str, tuple[str, str]] = {}  # token -> (campaign, annotator|"admin")
        self.applied = 0

    @classmethod
    def replay(cls, events: Iterable[Event]) -> "StoreState":
        state = cls()
        for event in events:
            state.apply(event)
        return state

    def campaign(self, campaign_id: str) -> Campaign:
        try:
            return self.campaigns[campaign_id]
        except KeyError:
            raise UnknownEntityError(f"unknown campaign: {campaign_id}")

    # -- fold ----------------------------------------------------------------

    def apply(self, event: Event) -> None:
        handler = getattr(self, "_apply_" + event.kind.replace("-", "_"))
        handler(event)
        self.applied = event.sequence

    def _apply_campaign_created(self, event: Event) -> None:
        p = event.payload
        schema = LabellingSchema.from_dict(p["schema"])
        campaign = Campaign(
            campaign_id=p["campaign_id"],
            name=p.get("name", p["campaign_id"]),
            schema=schema,
            annotators=list(p["annotators"]),
            annotator_tokens=dict(p["annotator_tokens"]),
            admin_token=p["admin_token"],
            config=dict(p.get("config", {})),
        )
        self.campaigns[campaign.campaign_id] = campaign
        self.tokens[campaign.admin_token] = (campaign.campaign_id, "admin")
        for annotator, token in campaign.annotator_tokens.items():
            self.tokens[token] = (campaign.campaign_id, annotator)

    def _apply_items_imported(self, event: Event) -> None:
        campaign = self.campaign(event.payload["campaign_id"])
        for rec in event.payload["items"]:
            item = Item.from_record(rec)
            campaign.items[item.id] = item

    def _apply_round_opened(self, event: Event) -> None:
        p = event.payload
        campaign = self.campaign(p["campaign_id"])
        round_ = Round(
            round_id=p["round_id"],
            index=len(campaign.round_order),
            item_ids=list(p["item_ids"]),
            from_queue=list(p.get("from_queue", ())),
            k=int(p["k"]),
            seed=int(p["seed"]),
        )
        campaign.rounds[round_.round_id] = round_
        campaign.round_order.append(round_.round_id)
        campaign.open_round_id = round_.round_id
        queued = set(round_.from_queue)
        campaign.reannotation_queue = [
            i for i in campaign.reannotation_queue if i not in queued
        ]
        campaign.batched.update(round_.item_ids)
        campaign.round_subs.setdefault(round_.round_id, {})

    def _apply_assignment_issued(self, event: Event) -> None:
        p = event.payload
        campaign = self.campaign(p["campaign_id"])
        round_ = campaign.rounds[p["round_id"]]
        round_.assignments = {
            item: tuple(annotators) for item, annotators in p["assignments"].items()
        }

    def _record_live(self, campaign: Campaign, annotation: Annotation) -> None:
        per_item = campaign.live.setdefault(annotation.item_id, {})
        previous = per_item.get(annotation.annotator_id)
        if previous is not None:
            old = campaign.annotations[previous]
            campaign.annotations[previous] = dataclasses.replace(
                old, superseded_by=annotation.annotation_id
            )
        campaign.annotations[annotation.annotation_id] = annotation
        per_item[annotation.annotator_id] = annotation.annotation_id

    def _apply_annotation_submitted(self, event: Event) -> None:
        p = event.payload
        campaign = self.campaign(p["campaign_id"])
        annotation = Annotation.from_record(p["annotation"])
        self._record_live(campaign, annotation)
        subs = campaign.round_subs.setdefault(annotation.round_id, {})
        subs[_sub_key(annotation.item_id, annotation.annotator_id)] = annotation.annotation_id
        key = p.get("idempotency_key")
        if key:
            campaign.idempotency[key] = {
                "annotation_id": annotation.annotation_id,
                "sequence": event.sequence,
                "item_id": annotation.item_id,
                "round_id": annotation.round_id,
            }

    def _apply_review_submitted(self, event: Event) -> None:
        p = event.payload
        campaign = self.campaign(p["campaign_id"])
        annotation = Annotation.from_record(p["annotation"])
        item_id = annotation.item_id
        self._record_live(campaign, annotation)
        campaign.reviewed_items.add(item_id)
        pending = campaign.review_pending.get(item_id, [])
        if annotation.annotator_id in pending:
            pending.remove(annotation.annotator_id)
        if not pending:
            campaign.review_pending.pop(item_id, None)
            campaign.review_context.pop(item_id, None)
            if item_id not in campaign.reannotation_queue and item_id not in campaign.harmonised:
                campaign.labels[item_id] = aggregate_item(
                    item_id, campaign.live_annotations(item_id), campaign.schema, reviewed=True
                )
        key = p.get("idempotency_key")
        if key:
            campaign.idempotency[key] = {
                "annotation_id": annotation.annotation_id,
                "sequence": event.sequence,
                "item_id": item_id,
                "round_id": annotation.round_id,
            }

    def _apply_item_harmonised(self, event: Event) -> None:
        p = event.payload
        campaign = self.campaign(p["campaign_id"])
        annotation = Annotation.from_record(p["annotation"])
        item_id = annotation.item_id
        for aid in list(campaign.live.get(item_id, {}).values()):
            old = campaign.annotations[aid]
            campaign.annotations[aid] = dataclasses.replace(
                old, superseded_by=annotation.annotation_id
            )
        campaign.annotations[annotation.annotation_id] = annotation
        campaign.live[item_id] = {annotation.annotator_id: annotation.annotation_id}
        campaign.harmonised[item_id] = campaign.harmonised.get(item_id, 0) + 1
        campaign.reannotation_queue = [i for i in campaign.reannotation_queue if i != item_id]
        campaign.review_pending.pop(item_id, None)
        campaign.review_context.pop(item_id, None)
        campaign.labels[item_id] = AggregateLabel(
            item_id=item_id,
            final_class=annotation.class_value,
            method=AggregationMethod.HARMONISED,
            flag_consensus=annotation.flags,
            contributing_annotations=(annotation.annotation_id,),
        )

    def _apply_round_closed(self, event: Event) -> None:
        p = event.payload
        campaign = self.campaign(p["campaign_id"])
        round_ = campaign.rounds[p["round_id"]]
        schema = campaign.schema
        threshold = campaign.config.get(
            "reannotation_threshold", schema.high_disagreement_threshold
        )

        round_anns = campaign.round_annotations(round_.round_id)
        report = agreement_report(
            round_anns,
            schema,
            round_id=round_.round_id,
            harmonised_items=frozenset(campaign.harmonised),
            computed_at=event.recorded_at,
        )
        scores = report.item_scores

        by_item: dict[str, list[Annotation]] = {}
        for ann in round_anns:
            by_item.setdefault(ann.item_id, []).append(ann)

        review_queue: list[str] = []
        for item_id in round_.item_ids:
            group = by_item.get(item_id)
            if not group or item_id in campaign.harmonised:
                continue
            if review_candidates(group, schema.review_policy, schema):
                pending = [
                    a
                    for a in campaign.annotators
                    if a not in campaign.live.get(item_id, {})
                ]
                if pending:
                    campaign.review_pending[item_id] = pending
                    campaign.review_context[item_id] = {
                        "round_id": round_.round_id,
                        "provisional": campaign.provisional_label(item_id),
                    }
                    review_queue.append(item_id)

        newly_queued: list[str] = []
        for item_id in round_.item_ids:
            if item_id in campaign.harmonised or item_id in campaign.holdout:
                continue
            group = by_item.get(item_id, [])
            marked = any(a.mark_for_review for a in group)
            contested = scores.get(item_id, 0.0) > threshold
            under = len(campaign.live.get(item_id, {})) < schema.min_annotators_per_item
            if (marked or contested or under) and item_id not in campaign.reannotation_queue:
                campaign.reannotation_queue.append(item_id)
                newly_queued.append(item_id)

        labelled: dict[str, dict] = {}
        for item_id in round_.item_ids:
            if (
                item_id in campaign.harmonised
                or item_id in campaign.reannotation_queue
                or item_id in campaign.review_pending
            ):
                continue
            live = campaign.live_annotations(item_id)
            if len(live) < schema.min_annotators_per_item:
                continue
            label = aggregate_item(
                item_id, live, schema, reviewed=item_id in campaign.reviewed_items
            )
            campaign.labels[item_id] = label
            labelled[item_id] = label.to_record()

        round_.closed = True
        round_.summary = {
            "round_id": round_.round_id,
            "agreement": report.to_dict(),
            "review_queue": review_queue,
            "reannotation_queue": list(campaign.reannotation_queue),
            "newly_queued": newly_queued,
            "labels": labelled,
            "expired": [list(pair) for pair in p.get("expired", ())],
        }
        if campaign.open_round_id == round_.round_id:
            campaign.open_round_id = None

    def _apply_holdout_carved(self, event: Event) -> None:
        p = event.payload
        campaign = self.campaign(p["campaign_id"])
        campaign.holdout = set(p["item_ids"])
        campaign.holdout_meta = {"fraction": p["fraction"], "seed": p["seed"]}
        campaign.reannotation_queue = [
            i for i in campaign.reannotation_queue if i not in campaign.holdout
        ]
        for item_id in list(campaign.review_pending):
            if item_id in campaign.holdout:
                campaign.review_pending.pop(item_id, None)
                campaign.review_context.pop(item_id, None)

    # -- snapshots -----------------------------------------------------------

    def to_snapshot(self) -> dict:
        campaigns = {}
        for cid, c in self.campaigns.items():
            campaigns[cid] = {
                "campaign_id": c.campaign_id,
                "name": c.name,
                "schema": c.schema.to_dict(),
                "annotators": list(c.annotators),
                "annotator_tokens": dict(c.annotator_tokens),
                "admin_token": c.admin_token,
                "config": dict(c.config),
                "items": [c.items[i].to_record() for i in c.items],
                "rounds": [
                    {
                        "round_id": r.round_id,
                        "index": r.index,
                        "item_ids": list(r.item_ids),
                        "from_queue": list(r.from_queue),
                        "k": r.k,
                        "seed": r.seed,
                        "assignments": {i: list(a) for i, a in r.assignments.items()},
                        "closed": r.closed,
                        "summary": r.summary,
                    }
                    for r in (c.rounds[rid] for rid in c.round_order)
                ],
                "open_round_id": c.open_round_id,
                "annotations": [c.annotations[a].to_record() for a in c.annotations],
                "live": {i: dict(m) for i, m in c.live.items()},
                "round_subs": {rid: dict(m) for rid, m in c.round_subs.items()},
                "idempotency": dict(c.idempotency),
                "review_pending": {i: list(p) for i, p in c.review_pending.items()},
                "review_context": {i: dict(ctx) for i, ctx in c.review_context.items()},
                "reviewed_items": sorted(c.reviewed_items),
                "reannotation_queue": list(c.reannotation_queue),
                "labels": {i: c.labels[i].to_record() for i in sorted(c.labels)},
                "harmonised": dict(c.harmonised),
                "holdout": sorted(c.holdout),
                "holdout_meta": c.holdout_meta,
                "batched": sorted(c.batched),
            }
        return {"version": SNAPSHOT_VERSION, "applied": self.applied, "campaigns": campaigns}

    @classmethod
    def from_snapshot(cls, snap: dict) -> "StoreState":
        if snap.get("version") != SNAPSHOT_VERSION:
            raise ValidationError("unsupported snapshot version")
        state = cls()
        state.applied = int(snap["applied"])
        for cid, raw in snap["campaigns"].items():
            campaign = Campaign(
                campaign_id=raw["campaign_id"],
                name=raw["name"],
                schema=LabellingSchema.from_dict(raw["schema"]),
                annotators=list(raw["annotators"]),
                annotator_tokens=dict(raw["annotator_tokens"]),
                admin_token=raw["admin_token"],
                config=dict(raw["config"]),
            )
            for rec in raw["items"]:
                item = Item.from_record(rec)
                campaign.items[item.id] = item
            for r in raw["rounds"]:
                round_ = Round(
                    round_id=r["round_id"],
                    index=r["index"],
                    item_ids=list(r["item_ids"]),
                    from_queue=list(r["from_queue"]),
                    k=r["k"],
                    seed=r["seed"],
                    assignments={i: tuple(a) for i, a in r["assignments"].items()},
                    closed=r["closed"],
                    summary=r["summary"],
                )
                campaign.rounds[round_.round_id] = round_
                campaign.round_order.append(round_.round_id)
            campaign.open_round_id = raw["open_round_id"]
            for rec in raw["annotations"]:
                ann = Annotation.from_record(rec)
                campaign.annotations[ann.annotation_id] = ann
            campaign.live = {i: dict(m) for i, m in raw["live"].items()}
            campaign.round_subs = {rid: dict(m) for rid, m in raw["round_subs"].items()}
            campaign.idempotency = dict(raw["idempotency"])
            campaign.review_pending = {i: list(p) for i, p in raw["review_pending"].items()}
            campaign.review_context = {i: dict(ctx) for i, ctx in raw["review_context"].items()}
            campaign.reviewed_items = set(raw["reviewed_items"])
            campaign.reannotation_queue = list(raw["reannotation_queue"])
            campaign.labels = {
                i: AggregateLabel.from_record(rec) for i, rec in raw["labels"].items()
            }
            campaign.harmonised = {i: int(n) for i, n in raw["harmonised"].items()}
            campaign.holdout = set(raw["holdout"])
            campaign.holdout_meta = raw["holdout_meta"]
            campaign.batched = set(raw["batched"])
            state.campaigns[cid] = campaign
            state.tokens[campaign.admin_token] = (cid, "admin")
            for annotator, token in campaign.annotator_tokens.items():
                state.tokens[token] = (cid, annotator)
        return state

    def digest(self) -> str:
        blob = json.dumps(self.to_snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Store: commands + queries over the log


class CampaignStore:
    """Single-writer command interface over an event log."""

    def __init__(
        self,
        path,
        clock: Callable[[], str] = utc_now,
        snapshot_every: int = 1000,
    ):
        self._lock = threading.RLock()
        self._clock = clock
        self._snapshot_every = snapshot_every
        self.log = EventLog(path)
        self._snapshot_path = Path(str(path) + ".snapshot.json")
        events = self.log.load()
        self.state = self._load_with_snapshot(events)

    def _load_with_snapshot(self, events: list[Event]) -> StoreState:
        if self._snapshot_path.exists():
            try:
                snap = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
                state = StoreState.from_snapshot(snap)
                if state.applied <= len(events):
                    for event in events[state.applied :]:
                        state.apply(event)
                    return state
            except Exception:
                pass  # cache only; fall through to full replay
        return StoreState.replay(events)

    def _append(self, kind: str, payload: dict) -> Event:
        event = self.log.append(kind, payload, self._clock())
        self.state.apply(event)
        if self._snapshot_every and event.sequence % self._snapshot_every == 0:
            # key order is preserved deliberately: queue and submission order
            # are part of the state
            tmp = self._snapshot_path.with_suffix(".tmp")
            tmp.write_text(json.dumps(self.state.to_snapshot()), encoding="utf-8")
            tmp.replace(self._snapshot_path)
        return event

    # -- commands -------------------------------------------------------------

    def create_campaign(
        self,
        name: str,
        schema: LabellingSchema,
        annotators: Sequence[str],
        config: Optional[dict] = None,
        campaign_id: Optional[str] = None,
    ) -> dict:
        require_valid_schema(schema)
        if not annotators:
            raise ValidationError("campaign needs at least one annotator")
        if len(set(annotators)) != len(annotators):
            raise ValidationError("annotator ids must be unique")
        with self._lock:
            cid = campaign_id or f"c{len(self.state.campaigns) + 1}"
            if cid in self.state.campaigns:
                raise ConflictError(f"campaign {cid} already exists")
            payload = {
                "campaign_id": cid,
                "name": name,
                "schema": schema.to_dict(),
                "annotators": list(annotators),
                "annotator_tokens": {a: secrets.token_hex(16) for a in annotators},
                "admin_token": secrets.token_hex(16),
                "config": dict(config or {}),
            }
            self._append("campaign-created", payload)
            return {
                "campaign_id": cid,
                "admin_token": payload["admin_token"],
                "annotator_tokens": payload["annotator_tokens"],
            }

    def import_items(self, campaign_id: str, items: Sequence[Item]) -> int:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            records = []
            for item in items:
                errors = item.validate()
                if errors:
                    raise ValidationError(f"invalid item {item.id!r}: {'; '.join(errors)}")
                if item.id in campaign.items:
                    raise ValidationError(f"duplicate item id: {item.id}")
                records.append(item.to_record())
            seen = [r["id"] for r in records]
            if len(set(seen)) != len(seen):
                raise ValidationError("duplicate item ids in import batch")
            self._append("items-imported", {"campaign_id": campaign_id, "items": records})
            return len(records)

    def open_round(
        self,
        campaign_id: str,
        size: int,
        seed: int,
        k: Optional[int] = None,
        round_id: Optional[str] = None,
    ) -> dict:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            if campaign.open_round_id is not None:
                raise ConflictError(f"round {campaign.open_round_id} is still open")
            if size < 1:
                raise ValidationError("round size must be >= 1")
            k = k or campaign.schema.min_annotators_per_item
            rid = round_id or f"r{len(campaign.round_order) + 1}"
            if rid in campaign.rounds:
                raise ConflictError(f"round {rid} already exists")
            from_queue = campaign.reannotation_queue[:size]
            fresh_budget = size - len(from_queue)
            fresh = [
                i
                for i in campaign.items
                if i not in campaign.batched and i not in campaign.holdout
            ][:fresh_budget]
            batch = from_queue + fresh
            if not batch:
                raise InfeasibleError("no items available for a new round")
            assignment = orchestrate.assign_batch(
                batch, campaign.annotators, k, seed, round_id=rid
            )
            self._append(
                "round-opened",
                {
                    "campaign_id": campaign_id,
                    "round_id": rid,
                    "item_ids": batch,
                    "from_queue": from_queue,
                    "k": k,
                    "seed": seed,
                },
            )
            self._append(
                "assignment-issued",
                {
                    "campaign_id": campaign_id,
                    "round_id": rid,
                    "assignments": {i: list(a) for i, a in assignment.items.items()},
                },
            )
            return {"round_id": rid, "n_items": len(batch), "from_queue": len(from_queue)}

    def submit_annotation(
        self,
        campaign_id: str,
        annotator_id: str,
        item_id: str,
        round_id: str,
        class_value: int,
        flags: Iterable[str] = (),
        mark_for_review: bool = False,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            if idempotency_key and idempotency_key in campaign.idempotency:
                return dict(campaign.idempotency[idempotency_key])
            round_ = campaign.rounds.get(round_id)
            if round_ is None:
                raise UnknownEntityError(f"unknown round: {round_id}")
            if round_.closed:
                raise RoundClosedError(f"round {round_id} is closed")
            if annotator_id not in round_.assignments.get(item_id, ()):
                raise UnknownEntityError(
                    f"no assignment of item {item_id} to {annotator_id} in round {round_id}"
                )
            annotation = Annotation(
                item_id=item_id,
                annotator_id=annotator_id,
                round_id=round_id,
                class_value=int(class_value),
                flags=frozenset(flags),
                mark_for_review=bool(mark_for_review),
                submitted_at=self._clock(),
                annotation_id=f"a{self.log.next_sequence()}",
            )
            errors = validate_annotation(annotation, campaign.schema)
            if errors:
                raise ValidationError("invalid annotation: " + "; ".join(errors))
            event = self._append(
                "annotation-submitted",
                {
                    "campaign_id": campaign_id,
                    "annotation": annotation.to_record(),
                    "idempotency_key": idempotency_key,
                },
            )
            return {
                "annotation_id": annotation.annotation_id,
                "sequence": event.sequence,
                "item_id": item_id,
                "round_id": round_id,
            }

    def submit_review(
        self,
        campaign_id: str,
        reviewer_id: str,
        item_id: str,
        action: str,
        class_value: Optional[int] = None,
        flags: Optional[Iterable[str]] = None,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        if action not in ("confirm", "amend", "escalate"):
            raise ValidationError(f"unknown review action: {action!r}")
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            if idempotency_key and idempotency_key in campaign.idempotency:
                return dict(campaign.idempotency[idempotency_key])
            pending = campaign.review_pending.get(item_id, ())
            if reviewer_id not in pending:
                raise UnknownEntityError(
                    f"no pending review of item {item_id} for {reviewer_id}"
                )
            context = campaign.review_context[item_id]
            provisional = context["provisional"]
            if action == "amend":
                if class_value is None:
                    raise ValidationError("amend requires a class_value")
                chosen = int(class_value)
                chosen_flags = frozenset(flags or ())
            else:
                chosen = int(provisional["class_value"]) if class_value is None else int(class_value)
                chosen_flags = frozenset(
                    provisional["flags"] if flags is None else flags
                )
            annotation = Annotation(
                item_id=item_id,
                annotator_id=reviewer_id,
                round_id=context["round_id"],
                class_value=chosen,
                flags=chosen_flags,
                mark_for_review=action == "escalate",
                submitted_at=self._clock(),
                annotation_id=f"a{self.log.next_sequence()}",
            )
            errors = validate_annotation(annotation, campaign.schema)
            if errors:
                raise ValidationError("invalid review: " + "; ".join(errors))
            event = self._append(
                "review-submitted",
                {
                    "campaign_id": campaign_id,
                    "action": action,
                    "annotation": annotation.to_record(),
                    "idempotency_key": idempotency_key,
                },
            )
            return {
                "annotation_id": annotation.annotation_id,
                "sequence": event.sequence,
                "item_id": item_id,
                "round_id": context["round_id"],
            }

    def harmonise_item(
        self,
        campaign_id: str,
        item_id: str,
        class_value: int,
        flags: Iterable[str] = (),
        session_ref: str = "deliberation",
        expected_revision: Optional[int] = None,
    ) -> AggregateLabel:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            if item_id not in campaign.items:
                raise UnknownEntityError(f"unknown item: {item_id}")
            if not campaign.live.get(item_id):
                raise ValidationError(f"item {item_id} has no annotations to harmonise")
            in_queue = (
                item_id in campaign.reannotation_queue
                or item_id in campaign.review_pending
                or item_id in campaign.harmonised
            )
            if not in_queue:
                raise ValidationError(f"item {item_id} is not in a deliberation queue")
            revision = campaign.harmonised.get(item_id, 0)
            if expected_revision is not None and expected_revision != revision:
                raise ConflictError(
                    f"item {item_id} was resolved concurrently",
                    details={"revision": revision},
                )
            round_id = (
                campaign.review_context.get(item_id, {}).get("round_id")
                or (campaign.round_order[-1] if campaign.round_order else "none")
            )
            annotation = Annotation(
                item_id=item_id,
                annotator_id=session_ref,
                round_id=round_id,
                class_value=int(class_value),
                flags=frozenset(flags),
                mark_for_review=False,
                submitted_at=self._clock(),
                annotation_id=f"h{self.log.next_sequence()}",
            )
            errors = validate_annotation(annotation, campaign.schema)
            if errors:
                raise ValidationError("invalid consensus: " + "; ".join(errors))
            self._append(
                "item-harmonised",
                {
                    "campaign_id": campaign_id,
                    "item_id": item_id,
                    "session_ref": session_ref,
                    "revision": revision + 1,
                    "annotation": annotation.to_record(),
                },
            )
            return campaign.labels[item_id]

    def close_round(self, campaign_id: str, round_id: str, force: bool = False) -> dict:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            round_ = campaign.rounds.get(round_id)
            if round_ is None:
                raise UnknownEntityError(f"unknown round: {round_id}")
            if round_.closed:
                return dict(round_.summary, already_closed=True)
            subs = campaign.round_subs.get(round_id, {})
            unsubmitted = [
                (item, annotator)
                for item, annotators in round_.assignments.items()
                for annotator in annotators
                if _sub_key(item, annotator) not in subs
            ]
            if unsubmitted and not force:
                raise ValidationError(
                    f"{len(unsubmitted)} assignments still pending; close with force to expire them",
                    details={"pending": [list(p) for p in unsubmitted[:20]]},
                )
            self._append(
                "round-closed",
                {
                    "campaign_id": campaign_id,
                    "round_id": round_id,
                    "expired": [list(p) for p in unsubmitted],
                },
            )
            return dict(campaign.rounds[round_id].summary)

    def carve_holdout(self, campaign_id: str, fraction: float, seed: int) -> dict:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            if campaign.holdout:
                raise ConflictError("holdout already carved")
            labelled = sorted(campaign.labels)
            ids = sorted(orchestrate.carve_holdout(labelled, fraction, seed))
            self._append(
                "holdout-carved",
                {
                    "campaign_id": campaign_id,
                    "fraction": fraction,
                    "seed": seed,
                    "item_ids": ids,
                },
            )
            return {"n_holdout": len(ids), "item_ids": ids}

    # -- queries --------------------------------------------------------------

    def authenticate(self, token: str) -> tuple[str, str]:
        with self._lock:
            try:
                return self.state.tokens[token]
            except KeyError:
                raise UnknownEntityError("unknown token")

    def next_queue(self, campaign_id: str, annotator_id: str) -> list[dict]:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            if annotator_id not in campaign.annotators:
                raise UnknownEntityError(f"unknown annotator: {annotator_id}")
            units: list[dict] = []
            for item_id, pending in campaign.review_pending.items():
                if annotator_id not in pending or item_id in campaign.holdout:
                    continue
                context = campaign.review_context[item_id]
                item = campaign.items[item_id]
                units.append(
                    {
                        "type": "review",
                        "item_id": item_id,
                        "round_id": context["round_id"],
                        "text": item.text,
                        "meta": dict(item.source_meta),
                        "provisional": dict(context["provisional"]),
                    }
                )
            rid = campaign.open_round_id
            if rid is not None:
                round_ = campaign.rounds[rid]
                subs = campaign.round_subs.get(rid, {})
                queued = set(round_.from_queue)
                for item_id in round_.item_ids:
                    if annotator_id not in round_.assignments.get(item_id, ()):
                        continue
                    if _sub_key(item_id, annotator_id) in subs:
                        continue
                    if item_id in campaign.holdout:
                        continue
                    item = campaign.items[item_id]
                    units.append(
                        {
                            "type": "annotate",
                            "item_id": item_id,
                            "round_id": rid,
                            "text": item.text,
                            "meta": dict(item.source_meta),
                            "reannotation": item_id in queued,
                        }
                    )
            return units

    def agreement(self, campaign_id: str, round_id: Optional[str] = None,
                  view: str = "live"):
        """Agreement report, per round or cumulative.

        ``view="pre-harmonisation"`` is the audit mode: harmonised-over
        annotations stay in the tables and consensus session records are
        ignored, reconstructing the disagreement as originally submitted.
        """
        if view not in ("live", "pre-harmonisation"):
            raise ValidationError(f"unknown agreement view: {view!r}")
        audit = view == "pre-harmonisation"
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            if round_id is not None:
                if round_id not in campaign.rounds:
                    raise UnknownEntityError(f"unknown round: {round_id}")
                anns = campaign.round_annotations(round_id)
            elif audit:
                anns = [
                    campaign.annotations[aid]
                    for aid in campaign.annotations
                    if campaign.annotations[aid].annotator_id in campaign.annotators
                ]
            else:
                anns = campaign.all_live()
            return agreement_report(
                anns,
                campaign.schema,
                round_id=round_id,
                harmonised_items=frozenset() if audit else frozenset(campaign.harmonised),
                include_superseded=audit,
            )

    def aggregate_labels(self, campaign_id: str) -> list[AggregateLabel]:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            return [campaign.labels[i] for i in sorted(campaign.labels)]

    def contested_items(self, campaign_id: str) -> list[dict]:
        """Deliberation queue, sorted by descending disagreement score."""
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            anonymize = campaign.config.get("anonymize_deliberation", True)
            rows = []
            for item_id in campaign.reannotation_queue:
                anns = campaign.live_annotations(item_id)
                score = (
                    campaign.item_score(item_id) if len(anns) >= 2 else 0.0
                )
                ordered = sorted(anns, key=lambda a: a.annotation_id or "")
                labels = []
                for idx, ann in enumerate(ordered):
                    who = (
                        f"Annotator {chr(ord('A') + idx)}" if anonymize else ann.annotator_id
                    )
                    labels.append(
                        {
                            "annotator": who,
                            "class_value": ann.class_value,
                            "flags": sorted(ann.flags),
                            "mark_for_review": ann.mark_for_review,
                        }
                    )
                rows.append(
                    {
                        "item_id": item_id,
                        "text": campaign.items[item_id].text,
                        "score": score,
                        "n_annotations": len(anns),
                        "annotations": labels,
                        "revision": campaign.harmonised.get(item_id, 0),
                    }
                )
            rows.sort(key=lambda r: (-r["score"], r["item_id"]))
            return rows

    def labelled_examples(self, campaign_id: str) -> list[LabelledExample]:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            return [
                LabelledExample.from_label(
                    campaign.items[i], campaign.labels[i], campaign.schema
                )
                for i in sorted(campaign.labels)
            ]

    def export_split(
        self,
        campaign_id: str,
        kind: str,
        test_fraction: float = 0.2,
        seed: int = 0,
        stratified: bool = False,
    ) -> list[LabelledExample]:
        """Materialize one export split.

        ``train`` and ``test`` come from a seeded split of the non-holdout
        labelled items; once a holdout is carved it becomes the test set (the
        gold benchmark) unless the caller asks for the split's own test side
        via kind ``split-test``. Holdout items never reach ``train``.
        """
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            examples = self.labelled_examples(campaign_id)
            holdout = [e for e in examples if e.id in campaign.holdout]
            rest = [e for e in examples if e.id not in campaign.holdout]
            if kind == "labels":
                return examples
            if kind == "holdout":
                return holdout
            if kind in ("train", "test", "split-test"):
                if not rest:
                    return []
                train, split_test = split_corpus(rest, test_fraction, seed, stratified)
                if kind == "train":
                    return train
                if kind == "split-test":
                    return split_test
                return holdout if holdout else split_test
            raise ValidationError(f"unknown export kind: {kind!r}")

    def campaign_info(self, campaign_id: str) -> dict:
        with self._lock:
            campaign = self.state.campaign(campaign_id)
            return {
                "campaign_id": campaign.campaign_id,
                "name": campaign.name,
                "schema": campaign.schema.to_dict(),
                "annotators": list(campaign.annotators),
                "config": dict(campaign.config),
                "rounds": [
                    {
                        "round_id": rid,
                        "closed": campaign.rounds[rid].closed,
                        "n_items": len(campaign.rounds[rid].item_ids),
                    }
                    for rid in campaign.round_order
                ],
                "n_items": len(campaign.items),
                "n_labelled": len(campaign.labels),
                "n_holdout": len(campaign.holdout),
                "reannotation_queue": list(campaign.reannotation_queue),
                "review_pending": sorted(campaign.review_pending),
            }
