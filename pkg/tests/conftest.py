import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from colabel.domain import Annotation, LabellingSchema


@pytest.fixture
def schema():
    return LabellingSchema()


@pytest.fixture
def flagged_schema():
    return LabellingSchema(
        flags=(
            "stereotyping",
            "dehumanisation",
            "deindividuation",
            "vilification",
            "calls_to_violence",
        )
    )


def make_annotation(
    item_id="i1",
    annotator_id="a1",
    round_id="r1",
    class_value=0,
    flags=(),
    mark_for_review=False,
    annotation_id=None,
):
    return Annotation(
        item_id=item_id,
        annotator_id=annotator_id,
        round_id=round_id,
        class_value=class_value,
        flags=frozenset(flags),
        mark_for_review=mark_for_review,
        submitted_at="2026-01-01T00:00:00.000+00:00",
        annotation_id=annotation_id,
    )
