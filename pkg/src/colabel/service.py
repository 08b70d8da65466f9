"""HTTP/JSON interface over a campaign store.

Annotators authenticate with the static bearer token issued at campaign
setup; the campaign creator gets an admin token for orchestration calls.
Domain failures are returned as ``{code, message, details}`` with a 4xx
status. Evaluations are derived artifacts and live in memory only.
"""

from __future__ import annotations

import json
import secrets
from typing import Optional

from fastapi import Depends, FastAPI, File, Form, Header, Query, Request, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .aggregate import labels_to_csv
from .dataset import split_stats
from .domain import Item, LabellingSchema
from .errors import (
    AuthError,
    ConflictError,
    DomainError,
    RoundClosedError,
    UnknownEntityError,
    ValidationError,
)
from .evaluate import PredictionSet, compare_models
from .store import CampaignStore

_STATUS = {
    "unknown-entity": 404,
    "round-closed": 409,
    "conflict": 409,
    "auth-error": 401,
    "infeasible": 422,
}


class CampaignCreate(BaseModel):
    name: str
    schema_: dict = Field(alias="schema")
    annotators: list[str]
    config: dict = Field(default_factory=dict)

    model_config = {"populate_by_name": True}


class ItemsImport(BaseModel):
    items: list[dict]


class RoundOpen(BaseModel):
    size: int
    seed: int
    k: Optional[int] = None
    round_id: Optional[str] = None


class AnnotationSubmit(BaseModel):
    item_id: str
    round_id: str
    class_value: int
    flags: list[str] = Field(default_factory=list)
    mark_for_review: bool = False
    idempotency_key: Optional[str] = None


class ReviewSubmit(BaseModel):
    item_id: str
    action: str
    class_value: Optional[int] = None
    flags: Optional[list[str]] = None
    idempotency_key: Optional[str] = None


class HarmoniseSubmit(BaseModel):
    item_id: str
    class_value: int
    flags: list[str] = Field(default_factory=list)
    session_ref: str = "deliberation"
    expected_revision: Optional[int] = None


class RoundClose(BaseModel):
    force: bool = False


def create_app(store: CampaignStore) -> FastAPI:
    app = FastAPI(title="colabel", version="0.1.0")
    evaluations: dict[str, dict] = {}

    @app.exception_handler(DomainError)
    async def domain_error_handler(_req: Request, exc: DomainError):
        status = _STATUS.get(exc.code, 400)
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": str(exc), "details": exc.details},
        )

    def bearer(authorization: Optional[str] = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthError("missing bearer token")
        return authorization.removeprefix("Bearer ").strip()

    def require_admin(campaign_id: str, token: str) -> None:
        try:
            cid, who = store.authenticate(token)
        except UnknownEntityError:
            raise AuthError("invalid token")
        if cid != campaign_id or who != "admin":
            raise AuthError("admin token required for this campaign")

    def require_member(campaign_id: str, token: str) -> str:
        try:
            cid, who = store.authenticate(token)
        except UnknownEntityError:
            raise AuthError("invalid token")
        if cid != campaign_id:
            raise AuthError("token does not belong to this campaign")
        return who

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/campaigns", status_code=201)
    def create_campaign(body: CampaignCreate):
        schema = LabellingSchema.from_dict(body.schema_)
        return store.create_campaign(
            name=body.name,
            schema=schema,
            annotators=body.annotators,
            config=body.config,
        )

    @app.get("/campaigns/{campaign_id}")
    def campaign_info(campaign_id: str, token: str = Depends(bearer)):
        require_member(campaign_id, token)
        return store.campaign_info(campaign_id)

    @app.post("/campaigns/{campaign_id}/items")
    def import_items(campaign_id: str, body: ItemsImport, token: str = Depends(bearer)):
        require_admin(campaign_id, token)
        items = [Item.from_record(rec) for rec in body.items]
        return {"imported": store.import_items(campaign_id, items)}

    @app.post("/campaigns/{campaign_id}/rounds")
    def open_round(campaign_id: str, body: RoundOpen, token: str = Depends(bearer)):
        require_admin(campaign_id, token)
        return store.open_round(
            campaign_id, size=body.size, seed=body.seed, k=body.k, round_id=body.round_id
        )

    @app.get("/queue")
    def queue(token: str = Depends(bearer)):
        cid, who = store.authenticate(token)
        if who == "admin":
            raise AuthError("queue is per-annotator; use an annotator token")
        campaign = store.campaign_info(cid)
        return {
            "campaign_id": cid,
            "annotator_id": who,
            "schema": campaign["schema"],
            "session_reminder_minutes": campaign["config"].get("session_reminder_minutes", 45),
            "units": store.next_queue(cid, who),
        }

    @app.post("/annotations")
    def submit_annotation(body: AnnotationSubmit, token: str = Depends(bearer)):
        cid, who = store.authenticate(token)
        if who == "admin":
            raise AuthError("annotations need an annotator token")
        return store.submit_annotation(
            cid,
            who,
            item_id=body.item_id,
            round_id=body.round_id,
            class_value=body.class_value,
            flags=body.flags,
            mark_for_review=body.mark_for_review,
            idempotency_key=body.idempotency_key,
        )

    @app.post("/reviews")
    def submit_review(body: ReviewSubmit, token: str = Depends(bearer)):
        cid, who = store.authenticate(token)
        if who == "admin":
            raise AuthError("reviews need an annotator token")
        return store.submit_review(
            cid,
            who,
            item_id=body.item_id,
            action=body.action,
            class_value=body.class_value,
            flags=body.flags,
            idempotency_key=body.idempotency_key,
        )

    @app.post("/campaigns/{campaign_id}/harmonisations")
    def harmonise(campaign_id: str, body: HarmoniseSubmit, token: str = Depends(bearer)):
        require_member(campaign_id, token)
        label = store.harmonise_item(
            campaign_id,
            item_id=body.item_id,
            class_value=body.class_value,
            flags=body.flags,
            session_ref=body.session_ref,
            expected_revision=body.expected_revision,
        )
        return label.to_record()

    @app.post("/campaigns/{campaign_id}/rounds/{round_id}/close")
    def close_round(
        campaign_id: str,
        round_id: str,
        body: Optional[RoundClose] = None,
        token: str = Depends(bearer),
    ):
        require_admin(campaign_id, token)
        return store.close_round(campaign_id, round_id, force=bool(body and body.force))

    @app.get("/campaigns/{campaign_id}/agreement")
    def agreement(
        campaign_id: str,
        round: Optional[str] = Query(default=None),
        view: str = Query(default="live"),
        token: str = Depends(bearer),
    ):
        require_member(campaign_id, token)
        return store.agreement(campaign_id, round, view=view).to_dict()

    @app.get("/campaigns/{campaign_id}/contested")
    def contested(campaign_id: str, token: str = Depends(bearer)):
        require_member(campaign_id, token)
        return {"items": store.contested_items(campaign_id)}

    @app.get("/campaigns/{campaign_id}/export")
    def export(
        campaign_id: str,
        kind: str = Query(...),
        test_fraction: float = Query(default=0.2),
        seed: int = Query(default=0),
        stratified: bool = Query(default=False),
        token: str = Depends(bearer),
    ):
        require_admin(campaign_id, token)
        if kind == "labels":
            campaign = store.state.campaign(campaign_id)
            csv_text = labels_to_csv(store.aggregate_labels(campaign_id), campaign.schema)
            return PlainTextResponse(csv_text, media_type="text/csv")
        examples = store.export_split(
            campaign_id, kind, test_fraction=test_fraction, seed=seed, stratified=stratified
        )
        lines = "".join(
            json.dumps(e.to_record(kind), ensure_ascii=False, separators=(",", ":")) + "\n"
            for e in examples
        )
        return PlainTextResponse(lines, media_type="application/x-ndjson")

    @app.post("/evaluations", status_code=201)
    async def create_evaluation(
        gold: UploadFile = File(...),
        predictions: list[UploadFile] = File(...),
        threshold: float = Form(default=0.5),
    ):
        gold_labels: dict[str, int] = {}
        for line in (await gold.read()).decode("utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            value = rec.get("label", rec.get("binary"))
            if value is None:
                raise ValidationError("gold records need a 'label' or 'binary' field")
            gold_labels[str(rec["id"])] = int(value)
        sets = []
        for upload in predictions:
            labels: dict[str, int] = {}
            scores: dict[str, float] = {}
            for line in (await upload.read()).decode("utf-8").splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                if "label" in rec:
                    labels[str(rec["id"])] = int(rec["label"])
                elif "score" in rec:
                    scores[str(rec["id"])] = float(rec["score"])
                else:
                    raise ValidationError("prediction records need 'label' or 'score'")
            name = upload.filename or f"model-{len(sets) + 1}"
            if scores:
                pset = PredictionSet.from_scores(name, scores, threshold)
                pset.labels.update(labels)
            else:
                pset = PredictionSet(name, labels)
            sets.append(pset)
        report = compare_models(gold_labels, sets)
        split_report = split_stats({"gold": _gold_examples(gold_labels)})
        evaluation_id = secrets.token_hex(8)
        evaluations[evaluation_id] = {
            "evaluation_id": evaluation_id,
            "report": report.to_dict(),
            "gold_stats": split_report.to_dict(),
        }
        return {"evaluation_id": evaluation_id}

    @app.get("/evaluations/{evaluation_id}")
    def get_evaluation(evaluation_id: str):
        if evaluation_id not in evaluations:
            raise UnknownEntityError(f"unknown evaluation: {evaluation_id}")
        return evaluations[evaluation_id]

    return app


def _gold_examples(gold: dict[str, int]):
    from .dataset import LabelledExample

    return [
        LabelledExample(id=i, text="", class_value=v, binary=v) for i, v in gold.items()
    ]
