// Shared shapes of the campaign service's JSON API.

export interface ScaleEntry {
  value: number;
  name: string;
}

export interface Schema {
  classification_scale: ScaleEntry[];
  flags: string[];
  min_annotators_per_item: number;
  review_policy: string;
  high_disagreement_threshold: number;
}

export interface ProvisionalLabel {
  class_value: number;
  flags: string[];
}

export interface WorkUnit {
  type: "annotate" | "review";
  item_id: string;
  round_id: string;
  text: string;
  meta: Record<string, unknown>;
  reannotation?: boolean;
  provisional?: ProvisionalLabel;
}

export interface QueueResponse {
  campaign_id: string;
  annotator_id: string;
  schema: Schema;
  session_reminder_minutes: number;
  units: WorkUnit[];
}

export interface SubmissionAck {
  annotation_id: string;
  sequence: number;
  item_id: string;
  round_id: string;
}

export interface ContestedAnnotation {
  annotator: string;
  class_value: number;
  flags: string[];
  mark_for_review: boolean;
}

export interface ContestedItem {
  item_id: string;
  text: string;
  score: number;
  n_annotations: number;
  annotations: ContestedAnnotation[];
  revision: number;
}

export interface ItemScoreRow {
  item_id: string;
  score: number;
  n_annotations: number;
  marked_for_review: boolean;
}

export interface AgreementReport {
  round_id: string | null;
  alpha_classification: number | null;
  ac1_per_flag: Record<string, number | null>;
  items: ItemScoreRow[];
  under_annotated: string[];
  warnings: string[];
  computed_at: string;
}

export interface RoundInfo {
  round_id: string;
  closed: boolean;
  n_items: number;
}

export interface CampaignInfo {
  campaign_id: string;
  name: string;
  schema: Schema;
  annotators: string[];
  config: Record<string, unknown>;
  rounds: RoundInfo[];
  n_items: number;
  n_labelled: number;
  n_holdout: number;
  reannotation_queue: string[];
  review_pending: string[];
}

export interface AggregateLabelRecord {
  item_id: string;
  final_class: number;
  method: string;
  flag_consensus: string[];
  contributing_annotations: string[];
}

export interface AnnotationDraftBody {
  item_id: string;
  round_id: string;
  class_value: number;
  flags: string[];
  mark_for_review: boolean;
  idempotency_key: string;
}

export type ReviewAction = "confirm" | "amend" | "escalate";

export interface ReviewBody {
  item_id: string;
  action: ReviewAction;
  class_value?: number;
  flags?: string[];
  idempotency_key: string;
}

export interface HarmoniseBody {
  item_id: string;
  class_value: number;
  flags: string[];
  session_ref?: string;
  expected_revision?: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details: unknown;
}
