"""Agreement statistics on small rating tables.

Walks through the two chance-corrected coefficients and the per-item
disagreement score that drives re-annotation routing.
"""

from colabel import LabellingSchema, ReliabilityTable, gwet_ac1, krippendorff_alpha
from colabel.agreement import item_disagreement
from colabel.domain import Annotation

# Three annotators label five texts on the 0/1/2 scale. Item 3 is contested.
rows = [
    [0, 0, 0],
    [2, 2, 2],
    [0, 0, 0],
    [0, 1, 2],
    [1, 1, 1],
]
table = ReliabilityTable.from_rows(rows, category_count=3)

print("ratings (items x annotators):")
for row in rows:
    print("  ", row)

print("\nKrippendorff's alpha")
for metric in ("nominal", "ordinal", "interval"):
    print(f"  {metric:<9} {krippendorff_alpha(table, metric):+.4f}")

# Two annotators, perfectly opposed on the extremes: alpha goes negative.
opposed = ReliabilityTable.from_rows([[0, 2], [2, 0]], category_count=3)
print(f"\nopposed extremes (0,2)/(2,0): ordinal alpha = {krippendorff_alpha(opposed, 'ordinal'):+.1f}")

# AC1 stays informative under skewed prevalence, which is why it is the
# per-flag coefficient: flags are rare, and alpha collapses on rare traits.
skewed = ReliabilityTable.from_rows([[1, 1], [0, 0], [1, 1], [1, 0]], category_count=2)
print(f"binary flag table, one disagreement: AC1 = {gwet_ac1(skewed):.4f}")

# The routing score: mean normalized pairwise distance over scored fields.
schema = LabellingSchema()


def ann(annotator, value):
    return Annotation(
        item_id="item-3", annotator_id=annotator, round_id="r1",
        class_value=value, submitted_at="",
    )


contested = [ann("a", 0), ann("b", 1), ann("c", 2)]
score = item_disagreement(contested, schema)
print(f"\ncontested item {{0,1,2}}: disagreement score = {score:.3f}")
print(f"high-disagreement threshold = {schema.high_disagreement_threshold}")
print("=> the item is queued for re-annotation and group deliberation")
