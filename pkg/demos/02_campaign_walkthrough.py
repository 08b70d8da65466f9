"""End-to-end campaign on an in-process store.

Creates a campaign, runs one annotation round with three annotators,
closes it, resolves the contested item in deliberation, carves a holdout,
and exports a training dataset — all against a temp event log.
"""

import tempfile
from pathlib import Path

from colabel import CampaignStore, Item, LabellingSchema
from colabel.aggregate import labels_to_csv
from colabel.dataset import export_dataset, split_stats

workdir = Path(tempfile.mkdtemp(prefix="colabel-demo-"))
store = CampaignStore(workdir / "campaign.ndjson")

schema = LabellingSchema(flags=("vilification", "dehumanisation"))
created = store.create_campaign("walkthrough", schema, ["ana", "ben", "cai"])
cid = created["campaign_id"]
print(f"campaign {cid} created; annotator tokens issued: {sorted(created['annotator_tokens'])}")

texts = [
    "market day went well",
    "those people are ruining everything",
    "community meeting at noon",
    "they are vermin and should leave",
    "rain expected this weekend",
    "we should not let them vote",
]
store.import_items(cid, [Item(id=f"post-{n}", text=t) for n, t in enumerate(texts)])

opened = store.open_round(cid, size=6, seed=7, k=3)
print(f"round {opened['round_id']} opened with {opened['n_items']} items")

# hand-scripted judgments: post-1 is contested, post-3 and post-5 are positives
votes = {
    "post-0": {"ana": 0, "ben": 0, "cai": 0},
    "post-1": {"ana": 0, "ben": 1, "cai": 2},
    "post-2": {"ana": 0, "ben": 0, "cai": 0},
    "post-3": {"ana": 2, "ben": 2, "cai": 2},
    "post-4": {"ana": 0, "ben": 0, "cai": 0},
    "post-5": {"ana": 1, "ben": 2, "cai": 1},
}
campaign = store.state.campaign(cid)
for item_id, by in votes.items():
    for annotator in campaign.rounds["r1"].assignments[item_id]:
        flags = {"vilification"} if item_id == "post-3" else set()
        store.submit_annotation(cid, annotator, item_id, "r1", by[annotator], flags=flags)

summary = store.close_round(cid, "r1")
print(f"\nround closed: alpha = {summary['agreement']['alpha_classification']:.3f}")
print(f"re-annotation queue: {summary['reannotation_queue']}")

for row in store.contested_items(cid):
    print(f"deliberation: {row['item_id']} score={row['score']:.3f} labels={[a['class_value'] for a in row['annotations']]}")

# the group settles on 'potentially' after discussion
store.harmonise_item(cid, "post-1", class_value=1, session_ref="session-1")
print("post-1 harmonised to class 1; contested list is now", store.contested_items(cid))

carved = store.carve_holdout(cid, fraction=1 / 3, seed=7)
print(f"\nholdout carved: {carved['item_ids']}")

splits = {
    "train": store.export_split(cid, "train", test_fraction=0.5, seed=7),
    "test": store.export_split(cid, "test", test_fraction=0.5, seed=7),
}
print(split_stats(splits).to_table())

manifest = export_dataset(splits, workdir / "export", seed=7, test_fraction=0.5)
print(f"\nexport written to {workdir / 'export'}")
print(labels_to_csv(store.aggregate_labels(cid), schema))
