"""Collaborative multi-round text labelling toolkit.

Campaign orchestration with redundant assignment and escalating rounds,
chance-corrected agreement statistics, conservative label aggregation with
broadcast review and harmonisation, gold-standard dataset export, and a
benchmarking harness for classifier prediction files.
"""

from .aggregate import (
    aggregate_classification,
    aggregate_flags,
    aggregate_item,
    review_candidates,
)
from .agreement import (
    AgreementReport,
    ReliabilityTable,
    agreement_report,
    gwet_ac1,
    item_disagreement,
    krippendorff_alpha,
)
from .dataset import (
    LabelledExample,
    SplitReport,
    export_dataset,
    split_corpus,
    split_stats,
)
from .domain import (
    AggregateLabel,
    AggregationMethod,
    Annotation,
    BinaryLabel,
    Item,
    LabellingSchema,
    ReviewPolicy,
    collapse_binary,
    validate_annotation,
    validate_schema,
)
from .evaluate import (
    ConfusionMatrix,
    EvaluationReport,
    Metrics,
    PredictionSet,
    TrainingLogEntry,
    classification_metrics,
    compare_models,
    confusion_matrix,
    keyword_classify,
    parse_training_log,
    select_epoch,
)
from .orchestrate import (
    Assignment,
    RoundPlan,
    assign_batch,
    carve_holdout,
    plan_rounds,
    sample_pool,
)
from .store import CampaignStore, Event, EventLog, StoreState

__version__ = "0.1.0"
