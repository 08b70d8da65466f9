import { describe, expect, it } from "vitest";

import { AnnotationSession, SessionApi } from "../src/queueFlow.js";
import type { QueueResponse, SubmissionAck } from "../src/types.js";

function queueFixture(units: Partial<QueueResponse["units"][number]>[]): QueueResponse {
  return {
    campaign_id: "c1",
    annotator_id: "ana",
    session_reminder_minutes: 45,
    schema: {
      classification_scale: [
        { value: 0, name: "Not" },
        { value: 1, name: "Potentially" },
        { value: 2, name: "Definitely" },
      ],
      flags: ["vilification", "dehumanisation"],
      min_annotators_per_item: 3,
      review_policy: "any-positive",
      high_disagreement_threshold: 0.5,
    },
    units: units.map((u, i) => ({
      type: "annotate",
      item_id: `i${i}`,
      round_id: "r1",
      text: `text ${i}`,
      meta: {},
      ...u,
    })) as QueueResponse["units"],
  };
}

class FakeApi implements SessionApi {
  queue: QueueResponse;
  annotationCalls: { body: unknown; key: string }[] = [];
  reviewCalls: { body: unknown; key: string }[] = [];
  failNext = 0;
  private sequence = 0;

  constructor(queue: QueueResponse) {
    this.queue = queue;
  }

  async getQueue(): Promise<QueueResponse> {
    return this.queue;
  }

  private ack(item_id: string, round_id: string): SubmissionAck {
    this.sequence += 1;
    return { annotation_id: `a${this.sequence}`, sequence: this.sequence, item_id, round_id };
  }

  async submitAnnotation(body: {
    item_id: string;
    round_id: string;
    idempotency_key: string;
  }): Promise<SubmissionAck> {
    if (this.failNext > 0) {
      this.failNext -= 1;
      throw new TypeError("network request failed");
    }
    this.annotationCalls.push({ body, key: body.idempotency_key });
    return this.ack(body.item_id, body.round_id);
  }

  async submitReview(body: {
    item_id: string;
    idempotency_key: string;
  }): Promise<SubmissionAck> {
    if (this.failNext > 0) {
      this.failNext -= 1;
      throw new TypeError("network request failed");
    }
    this.reviewCalls.push({ body, key: body.idempotency_key });
    return this.ack(body.item_id, "r1");
  }
}

describe("AnnotationSession", () => {
  it("exposes class and flag options from the served schema, not hardcoded", async () => {
    const queue = queueFixture([{}]);
    queue.schema.classification_scale = [
      { value: 0, name: "none" },
      { value: 1, name: "mild" },
      { value: 2, name: "strong" },
      { value: 3, name: "severe" },
    ];
    queue.schema.flags = ["sarcasm"];
    const session = new AnnotationSession(new FakeApi(queue));
    await session.refresh();
    expect(session.classOptions().map((o) => o.value)).toEqual([0, 1, 2, 3]);
    expect(session.flagOptions()).toEqual(["sarcasm"]);
    expect(() => session.selectClass(9)).toThrow(/not in the campaign schema/);
    expect(() => session.toggleFlag("vilification")).toThrow(/not in the campaign schema/);
  });

  it("disables submission until a class is chosen", async () => {
    const session = new AnnotationSession(new FakeApi(queueFixture([{}])));
    await session.refresh();
    expect(session.canSubmit()).toBe(false);
    await expect(session.submit()).rejects.toThrow(/class must be chosen/);
    session.selectClass(2);
    expect(session.canSubmit()).toBe(true);
  });

  it("advances only on acknowledged submission", async () => {
    const api = new FakeApi(queueFixture([{}, {}]));
    const session = new AnnotationSession(api, { maxAttempts: 1 });
    await session.refresh();
    session.selectClass(1);
    api.failNext = 1;
    await expect(session.submit()).rejects.toThrow();
    expect(session.position).toBe(0);
    await session.submit();
    expect(session.position).toBe(1);
    expect(session.submitted).toBe(1);
  });

  it("reuses the idempotency key across retries of one unit", async () => {
    const api = new FakeApi(queueFixture([{}, {}]));
    const keys: string[] = [];
    let counter = 0;
    const session = new AnnotationSession(api, {
      maxAttempts: 1,
      newKey: () => {
        counter += 1;
        const key = `key-${counter}`;
        keys.push(key);
        return key;
      },
    });
    await session.refresh();
    session.selectClass(0);
    api.failNext = 1;
    await expect(session.submit()).rejects.toThrow();
    await session.submit(); // retry: same unit, same key
    session.selectClass(0);
    await session.submit(); // next unit: fresh key
    expect(api.annotationCalls.map((c) => c.key)).toEqual(["key-1", "key-2"]);
    expect(keys).toEqual(["key-1", "key-2"]);
  });

  it("retries internally with the same key when attempts allow", async () => {
    const api = new FakeApi(queueFixture([{}]));
    const session = new AnnotationSession(api, { maxAttempts: 3, newKey: () => "only-key" });
    await session.refresh();
    session.selectClass(2);
    api.failNext = 2;
    const ack = await session.submit();
    expect(ack.item_id).toBe("i0");
    expect(api.annotationCalls).toHaveLength(1);
    expect(api.annotationCalls[0]!.key).toBe("only-key");
  });

  it("handles the empty queue state", async () => {
    const session = new AnnotationSession(new FakeApi(queueFixture([])));
    await session.refresh();
    expect(session.current()).toBeNull();
    expect(session.remaining()).toBe(0);
    await expect(session.submit()).rejects.toThrow(/no pending items/);
  });

  it("derives review actions from the draft vs the provisional label", async () => {
    const api = new FakeApi(
      queueFixture([
        { type: "review", provisional: { class_value: 2, flags: [] } },
        { type: "review", provisional: { class_value: 2, flags: [] } },
        { type: "review", provisional: { class_value: 2, flags: [] } },
      ]),
    );
    const session = new AnnotationSession(api);
    await session.refresh();

    // untouched draft starts at the provisional label -> confirm
    expect(session.draft.classValue).toBe(2);
    await session.submit();

    session.selectClass(1);
    await session.submit(); // changed class -> amend

    session.toggleMark();
    await session.submit(); // marked -> escalate

    const actions = api.reviewCalls.map((c) => (c.body as { action: string }).action);
    expect(actions).toEqual(["confirm", "amend", "escalate"]);
  });

  it("runs a whole queue via the decide callback", async () => {
    const api = new FakeApi(queueFixture([{}, {}, {}]));
    const session = new AnnotationSession(api);
    await session.refresh();
    const acks = await session.run((unit, s) => s.selectClass(unit.item_id === "i1" ? 2 : 0));
    expect(acks).toHaveLength(3);
    expect(session.remaining()).toBe(0);
    const classes = api.annotationCalls.map(
      (c) => (c.body as { class_value: number }).class_value,
    );
    expect(classes).toEqual([0, 2, 0]);
  });
});
