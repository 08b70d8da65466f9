// One-item-at-a-time annotation session.
//
// The flow is deliberately strict: class choices and flag checkboxes come
// from the schema the service returned (never hardcoded), submission is
// disabled until a class is chosen, and the queue only advances once the
// service acknowledges the write. Retries reuse the idempotency key minted
// for the first attempt, so a double click or a flaky network never yields
// a second annotation.

import type {
  QueueResponse,
  ReviewAction,
  ScaleEntry,
  SubmissionAck,
  WorkUnit,
} from "./types.js";

export interface SessionApi {
  getQueue(): Promise<QueueResponse>;
  submitAnnotation(body: {
    item_id: string;
    round_id: string;
    class_value: number;
    flags: string[];
    mark_for_review: boolean;
    idempotency_key: string;
  }): Promise<SubmissionAck>;
  submitReview(body: {
    item_id: string;
    action: ReviewAction;
    class_value?: number;
    flags?: string[];
    idempotency_key: string;
  }): Promise<SubmissionAck>;
}

export interface Draft {
  classValue: number | null;
  flags: Set<string>;
  markForReview: boolean;
}

export interface SessionOptions {
  maxAttempts?: number;
  newKey?: () => string;
}

function defaultKey(): string {
  return globalThis.crypto.randomUUID();
}

export class AnnotationSession {
  queue: QueueResponse | null = null;
  position = 0;
  submitted = 0;
  draft: Draft = { classValue: null, flags: new Set(), markForReview: false };

  private pendingKey: string | null = null;
  private readonly maxAttempts: number;
  private readonly newKey: () => string;

  constructor(
    private readonly api: SessionApi,
    options: SessionOptions = {},
  ) {
    this.maxAttempts = options.maxAttempts ?? 3;
    this.newKey = options.newKey ?? defaultKey;
  }

  async refresh(): Promise<void> {
    this.queue = await this.api.getQueue();
    this.position = 0;
    this.submitted = 0;
    this.resetDraft();
  }

  get schema() {
    return this.queue?.schema ?? null;
  }

  current(): WorkUnit | null {
    if (!this.queue) return null;
    return this.queue.units[this.position] ?? null;
  }

  remaining(): number {
    if (!this.queue) return 0;
    return this.queue.units.length - this.position;
  }

  /** Class buttons are generated from the campaign schema. */
  classOptions(): ScaleEntry[] {
    return this.schema?.classification_scale ?? [];
  }

  /** Flag checkboxes likewise. */
  flagOptions(): string[] {
    return this.schema?.flags ?? [];
  }

  resetDraft(): void {
    const unit = this.current();
    if (unit?.type === "review" && unit.provisional) {
      // reviews start from the provisional label being confirmed
      this.draft = {
        classValue: unit.provisional.class_value,
        flags: new Set(unit.provisional.flags),
        markForReview: false,
      };
    } else {
      this.draft = { classValue: null, flags: new Set(), markForReview: false };
    }
    this.pendingKey = null;
  }

  selectClass(value: number): void {
    const allowed = this.classOptions().some((entry) => entry.value === value);
    if (!allowed) {
      throw new Error(`class ${value} is not in the campaign schema`);
    }
    this.draft.classValue = value;
  }

  toggleFlag(name: string): void {
    if (!this.flagOptions().includes(name)) {
      throw new Error(`flag ${name} is not in the campaign schema`);
    }
    if (this.draft.flags.has(name)) {
      this.draft.flags.delete(name);
    } else {
      this.draft.flags.add(name);
    }
  }

  toggleMark(): void {
    this.draft.markForReview = !this.draft.markForReview;
  }

  canSubmit(): boolean {
    return this.current() !== null && this.draft.classValue !== null;
  }

  private reviewAction(unit: WorkUnit): ReviewAction {
    if (this.draft.markForReview) return "escalate";
    const provisional = unit.provisional;
    if (
      provisional &&
      this.draft.classValue === provisional.class_value &&
      sameFlags(this.draft.flags, provisional.flags)
    ) {
      return "confirm";
    }
    return "amend";
  }

  /**
   * Submit the current draft; advances to the next unit only after the
   * service acknowledged it. Safe to call again after a failure: the
   * idempotency key survives until the unit is acknowledged.
   */
  async submit(): Promise<SubmissionAck> {
    const unit = this.current();
    if (!unit) throw new Error("no pending items");
    if (this.draft.classValue === null) {
      throw new Error("a class must be chosen before submitting");
    }
    if (this.pendingKey === null) {
      this.pendingKey = this.newKey();
    }
    const key = this.pendingKey;
    let lastError: unknown = null;
    for (let attempt = 0; attempt < this.maxAttempts; attempt++) {
      try {
        const ack =
          unit.type === "review"
            ? await this.api.submitReview({
                item_id: unit.item_id,
                action: this.reviewAction(unit),
                class_value: this.draft.classValue,
                flags: [...this.draft.flags].sort(),
                idempotency_key: key,
              })
            : await this.api.submitAnnotation({
                item_id: unit.item_id,
                round_id: unit.round_id,
                class_value: this.draft.classValue,
                flags: [...this.draft.flags].sort(),
                mark_for_review: this.draft.markForReview,
                idempotency_key: key,
              });
        this.position += 1;
        this.submitted += 1;
        this.resetDraft();
        return ack;
      } catch (error) {
        lastError = error;
      }
    }
    throw lastError;
  }

  /** Drive the whole queue with a callback that fills in each draft. */
  async run(
    decide: (unit: WorkUnit, session: AnnotationSession) => void,
  ): Promise<SubmissionAck[]> {
    const acks: SubmissionAck[] = [];
    for (let unit = this.current(); unit !== null; unit = this.current()) {
      decide(unit, this);
      acks.push(await this.submit());
    }
    return acks;
  }
}

function sameFlags(a: Set<string>, b: string[]): boolean {
  return a.size === b.length && b.every((flag) => a.has(flag));
}
