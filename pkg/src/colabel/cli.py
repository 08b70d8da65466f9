"""Operator command line wrapping every pipeline stage.

Each subcommand is a thin adapter over one module operation. Randomized
subcommands require an explicit ``--seed``; there is never an implicit
time-based seed. Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import orchestrate
from .aggregate import labels_to_csv
from .dataset import export_dataset, split_corpus, split_stats
from .domain import Item, LabellingSchema, read_items_jsonl, require_valid_schema
from .errors import DomainError
from .evaluate import (
    PredictionSet,
    ReportRow,
    classification_metrics,
    compare_models,
    confusion_matrix,
    metrics_row,
    parse_training_log,
    read_gold_jsonl,
    select_epoch,
)
from .store import CampaignStore


def _write_out(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _cmd_init(args) -> int:
    schema = LabellingSchema.load(args.schema) if args.schema else LabellingSchema()
    require_valid_schema(schema)
    store = CampaignStore(args.store)
    created = store.create_campaign(
        name=args.name,
        schema=schema,
        annotators=args.annotators.split(","),
        campaign_id=args.campaign,
    )
    _write_out(json.dumps(created, indent=2), args.out)
    return 0


def _cmd_import(args) -> int:
    store = CampaignStore(args.store)
    items = read_items_jsonl(args.items)
    count = store.import_items(args.campaign, items)
    print(f"imported {count} items")
    return 0


def _cmd_sample(args) -> int:
    items = read_items_jsonl(args.corpus)
    picked = orchestrate.sample_pool(items, args.n, args.seed)
    lines = "".join(json.dumps(i.to_record(), ensure_ascii=False) + "\n" for i in picked)
    _write_out(lines, args.out)
    return 0


def _cmd_plan(args) -> int:
    plan = orchestrate.plan_rounds(args.total, args.rounds, args.growth)
    print(" ".join(str(s) for s in plan.round_sizes))
    return 0


def _cmd_assign(args) -> int:
    if args.store:
        store = CampaignStore(args.store)
        opened = store.open_round(
            args.campaign, size=args.size, seed=args.seed, k=args.k, round_id=args.round
        )
        _write_out(json.dumps(opened, indent=2), args.out)
        return 0
    items = [i.id for i in read_items_jsonl(args.items)]
    assignment = orchestrate.assign_batch(items, args.annotators.split(","), args.k, args.seed)
    lines = ["item_id,annotator_id"]
    for item_id, annotators in assignment.items.items():
        for a in annotators:
            lines.append(f"{item_id},{a}")
    _write_out("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(CampaignStore(args.store))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_close_round(args) -> int:
    store = CampaignStore(args.store)
    summary = store.close_round(args.campaign, args.round, force=args.force)
    _write_out(json.dumps(summary, indent=2), args.out)
    if args.queues_out:
        lines = ["item_id,queue"]
        lines += [f"{i},review" for i in summary.get("review_queue", ())]
        lines += [f"{i},reannotation" for i in summary.get("reannotation_queue", ())]
        Path(args.queues_out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def _cmd_agreement(args) -> int:
    store = CampaignStore(args.store)
    report = store.agreement(args.campaign, args.round, view=args.view)
    if args.format == "csv":
        _write_out(report.to_items_csv(), args.out)
    else:
        _write_out(json.dumps(report.to_dict(), indent=2), args.out)
    return 0


def _cmd_aggregate(args) -> int:
    store = CampaignStore(args.store)
    labels = store.aggregate_labels(args.campaign)
    campaign = store.state.campaign(args.campaign)
    if args.format == "json":
        _write_out(json.dumps([l.to_record() for l in labels], indent=2), args.out)
    else:
        _write_out(labels_to_csv(labels, campaign.schema), args.out)
    return 0


def _cmd_holdout(args) -> int:
    store = CampaignStore(args.store)
    carved = store.carve_holdout(args.campaign, args.fraction, args.seed)
    _write_out(json.dumps(carved, indent=2), args.out)
    return 0


def _cmd_split(args) -> int:
    store = CampaignStore(args.store)
    train = store.export_split(
        args.campaign, "train", test_fraction=args.test_fraction,
        seed=args.seed, stratified=args.stratified,
    )
    test = store.export_split(
        args.campaign, "test", test_fraction=args.test_fraction,
        seed=args.seed, stratified=args.stratified,
    )
    report = split_stats({"train": train, "test": test})
    if args.format == "json":
        _write_out(json.dumps(report.to_dict(), indent=2), args.out)
    else:
        _write_out(report.to_table() + "\n", args.out)
    return 0


def _cmd_export(args) -> int:
    store = CampaignStore(args.store)
    splits = {
        "train": store.export_split(
            args.campaign, "train", test_fraction=args.test_fraction,
            seed=args.seed, stratified=args.stratified,
        ),
        "test": store.export_split(
            args.campaign, "test", test_fraction=args.test_fraction,
            seed=args.seed, stratified=args.stratified,
        ),
    }
    manifest = export_dataset(
        splits,
        args.out_dir,
        include_flags=args.include_flags,
        csv_mirror=args.format == "csv",
        seed=args.seed,
        test_fraction=args.test_fraction,
        stratified=args.stratified,
    )
    campaign = store.state.campaign(args.campaign)
    labels_csv = labels_to_csv(store.aggregate_labels(args.campaign), campaign.schema)
    Path(args.out_dir, "labels.csv").write_text(labels_csv, encoding="utf-8")
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return 0


def _cmd_evaluate(args) -> int:
    gold = read_gold_jsonl(args.gold)
    pset = PredictionSet.from_jsonl(args.pred, model_name=args.name, threshold=args.threshold)
    metrics = classification_metrics(confusion_matrix(gold, pset.labels))
    if args.format == "json":
        _write_out(json.dumps(metrics.to_dict(), indent=2), args.out)
    else:
        report = compare_models(gold, [pset])
        _write_out(report.to_table() + "\n", args.out)
    return 0


def _load_reported(path) -> list[ReportRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            rows.append(
                ReportRow(
                    model_name=rec["model"],
                    accuracy=float(rec["accuracy"]),
                    precision_positive=float(rec["precision_positive"]),
                    recall_positive=float(rec["recall_positive"]),
                    precision_macro=float(rec["precision_macro"]),
                    recall_macro=float(rec["recall_macro"]),
                    f1_macro=float(rec["f1_macro"]),
                    source="reported",
                )
            )
    return rows


def _cmd_compare(args) -> int:
    gold = read_gold_jsonl(args.gold)
    names = args.names.split(",") if args.names else [None] * len(args.pred)
    if len(names) != len(args.pred):
        raise DomainError("--names must match the number of --pred files")
    sets = [
        PredictionSet.from_jsonl(path, model_name=name, threshold=args.threshold)
        for path, name in zip(args.pred, names)
    ]
    reported = _load_reported(args.reported) if args.reported else []
    report = compare_models(gold, sets, reported_rows=reported)
    if args.format == "json":
        _write_out(json.dumps(report.to_dict(), indent=2), args.out)
    elif args.format == "csv":
        _write_out(report.to_csv(), args.out)
    else:
        _write_out(report.to_table() + "\n", args.out)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _cmd_select_epoch(args) -> int:
    log = parse_training_log(Path(args.log).read_text(encoding="utf-8"))
    print(select_epoch(log, args.policy))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colabel",
        description="Collaborative labelling campaigns: orchestration, agreement, export, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    p = add("init", _cmd_init, help="create a campaign in a store file")
    p.add_argument("--store", required=True)
    p.add_argument("--name", default="campaign")
    p.add_argument("--campaign", default=None)
    p.add_argument("--schema", default=None, help="schema JSON file (default 3-class, no flags)")
    p.add_argument("--annotators", required=True, help="comma-separated annotator ids")
    p.add_argument("--out", default=None)

    p = add("import", _cmd_import, help="import items (JSONL) into a campaign")
    p.add_argument("--store", required=True)
    p.add_argument("--campaign", required=True)
    p.add_argument("--items", required=True)

    p = add("sample", _cmd_sample, help="sample n items from a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)

    p = add("plan", _cmd_plan, help="plan escalating round sizes")
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--growth", type=float, default=2.0)

    p = add("assign", _cmd_assign, help="open a round and issue assignments")
    p.add_argument("--store", default=None)
    p.add_argument("--campaign", default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--round", default=None)
    p.add_argument("--items", default=None, help="items JSONL (file mode, no store)")
    p.add_argument("--annotators", default=None, help="comma-separated (file mode)")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)

    p = add("serve", _cmd_serve, help="run the HTTP service")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = add("close-round", _cmd_close_round, help="close a round and print its summary")
    p.add_argument("--store", required=True)
    p.add_argument("--campaign", required=True)
    p.add_argument("--round", required=True)
    p.add_argument("--force", action="store_true", help="expire unsubmitted assignments")
    p.add_argument("--queues-out", default=None, help="also write the queues as CSV")
    p.add_argument("--out", default=None)

    p = add("agreement", _cmd_agreement, help="agreement report (per round or cumulative)")
    p.add_argument("--store", required=True)
    p.add_argument("--campaign", required=True)
    p.add_argument("--round", default=None)
    p.add_argument("--view", choices=["live", "pre-harmonisation"], default="live")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)

    p = add("aggregate", _cmd_aggregate, help="export aggregate labels")
    p.add_argument("--store", required=True)
    p.add_argument("--campaign", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)

    p = add("holdout", _cmd_holdout, help="carve the gold holdout from labelled items")
    p.add_argument("--store", required=True)
    p.add_argument("--campaign", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)

    p = add("split", _cmd_split, help="train/test split statistics")
    p.add_argument("--store", required=True)
    p.add_argument("--campaign", required=True)
    p.add_argument("--test-fraction", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--format", choices=["json", "table"], default="table")
    p.add_argument("--out", default=None)

    p = add("export", _cmd_export, help="write train/test/labels export files")
    p.add_argument("--store", required=True)
    p.add_argument("--campaign", required=True)
    p.add_argument("--test-fraction", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--include-flags", action="store_true")
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--out-dir", required=True)

    p = add("evaluate", _cmd_evaluate, help="score one prediction file against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.add_argument("--out", default=None)

    p = add("compare", _cmd_compare, help="comparative model report")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", action="append", required=True, help="repeatable")
    p.add_argument("--names", default=None, help="comma-separated model names")
    p.add_argument("--reported", default=None, help="JSONL of externally reported rows")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    p.add_argument("--out", default=None)

    p = add("select-epoch", _cmd_select_epoch, help="pick the epoch to keep from a training log")
    p.add_argument("--log", required=True)
    p.add_argument(
        "--policy", choices=["trajectory", "min-val-loss", "max-f1"], default="trajectory"
    )

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DomainError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
