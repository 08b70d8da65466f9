// Vanilla DOM shell around the session and dashboard models. One item on
// screen at a time; everything interactive is generated from the campaign
// schema served by the API.

import { ApiClient, isAuthError } from "./api.js";
import { ConflictNotice, DeliberationBoard } from "./deliberation.js";
import { AnnotationSession } from "./queueFlow.js";

const POLL_INTERVAL_MS = 5000;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function mountApp(root: HTMLElement): void {
  clear(root);
  const form = el("form", { class: "login" });
  const baseInput = el("input", {
    value: window.location.origin,
    placeholder: "service URL",
  });
  const tokenInput = el("input", { placeholder: "annotator token", type: "password" });
  const campaignInput = el("input", { placeholder: "campaign id (facilitators)" });
  const message = el("p", { class: "error" });
  form.append(
    el("h1", {}, "colabel"),
    el("label", {}, "Service", baseInput),
    el("label", {}, "Token", tokenInput),
    el("label", {}, "Campaign", campaignInput),
    el("button", { type: "submit" }, "Start"),
    message,
  );
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const api = new ApiClient(baseInput.value.replace(/\/$/, ""), tokenInput.value);
    try {
      await mountSession(root, api, campaignInput.value.trim());
    } catch (error) {
      message.textContent = isAuthError(error)
        ? "token rejected; check it and try again"
        : String(error);
    }
  });
  root.append(form);
}

async function mountSession(
  root: HTMLElement,
  api: ApiClient,
  campaignId: string,
): Promise<void> {
  const session = new AnnotationSession(api);
  await session.refresh();
  clear(root);

  const queuePanel = el("section", { class: "queue" });
  root.append(queuePanel);
  if (campaignId) {
    const board = new DeliberationBoard(api, campaignId);
    const boardPanel = el("section", { class: "deliberation" });
    root.append(boardPanel);
    await renderBoard(boardPanel, board);
  }

  const reminderMinutes = session.queue?.session_reminder_minutes ?? 45;
  window.setTimeout(() => {
    root.prepend(
      el(
        "p",
        { class: "reminder" },
        `You've been annotating for ${reminderMinutes} minutes — consider a break.`,
      ),
    );
  }, reminderMinutes * 60 * 1000);

  const renderQueue = () => renderUnit(queuePanel, session, renderQueueRef);
  const renderQueueRef = { current: renderQueue };
  renderQueue();

  window.setInterval(async () => {
    if (session.current() === null) {
      await session.refresh();
      renderQueue();
    }
  }, POLL_INTERVAL_MS);
}

function renderUnit(
  panel: HTMLElement,
  session: AnnotationSession,
  rerenderRef: { current: () => void },
): void {
  clear(panel);
  const unit = session.current();
  if (!unit) {
    panel.append(el("p", { class: "empty" }, "No pending items — polling for new work."));
    return;
  }
  const badge =
    unit.type === "review"
      ? el("span", { class: "badge review" }, "review & confirm")
      : unit.reannotation
        ? el("span", { class: "badge reannotation" }, "re-annotation")
        : el("span", { class: "badge fresh" }, "fresh");
  panel.append(
    el("header", {}, badge, el("span", { class: "progress" }, ` ${session.remaining()} left`)),
    el("blockquote", {}, unit.text),
  );

  const classRow = el("div", { class: "classes", role: "radiogroup" });
  for (const entry of session.classOptions()) {
    const button = el("button", { type: "button", "data-value": String(entry.value) },
      `${entry.value} — ${entry.name}`);
    if (session.draft.classValue === entry.value) button.classList.add("selected");
    button.addEventListener("click", () => {
      session.selectClass(entry.value);
      rerenderRef.current();
    });
    classRow.append(button);
  }
  panel.append(classRow);

  const flagRow = el("div", { class: "flags" });
  for (const flag of session.flagOptions()) {
    const box = el("input", { type: "checkbox" });
    (box as HTMLInputElement).checked = session.draft.flags.has(flag);
    box.addEventListener("change", () => session.toggleFlag(flag));
    flagRow.append(el("label", {}, box, flag));
  }
  panel.append(flagRow);

  const mark = el("input", { type: "checkbox" });
  (mark as HTMLInputElement).checked = session.draft.markForReview;
  mark.addEventListener("change", () => session.toggleMark());
  panel.append(el("label", { class: "mark" }, mark, "mark for review"));

  const submit = el("button", { class: "submit" }, "Submit") as HTMLButtonElement;
  submit.disabled = !session.canSubmit();
  submit.addEventListener("click", async () => {
    submit.disabled = true; // the idempotency key also guards double clicks
    try {
      await session.submit();
    } catch (error) {
      panel.append(el("p", { class: "error" }, `submission failed: ${String(error)}`));
    }
    rerenderRef.current();
  });
  panel.append(submit);
}

async function renderBoard(panel: HTMLElement, board: DeliberationBoard): Promise<void> {
  await board.refresh();
  await board.loadTrend();
  clear(panel);
  panel.append(el("h2", {}, "Deliberation queue"));
  const trend = board.trend
    .map((p) => `${p.round_id}: ${p.alpha === null ? "n/a" : p.alpha.toFixed(3)}`)
    .join("  ·  ");
  panel.append(el("p", { class: "trend" }, trend ? `alpha by round — ${trend}` : ""));

  for (const item of board.items) {
    const row = el("article", { class: "contested" });
    row.append(
      el("h3", {}, `${item.item_id} — disagreement ${item.score.toFixed(3)}`),
      el("blockquote", {}, item.text),
      el(
        "ul",
        {},
        ...item.annotations.map((a) =>
          el(
            "li",
            {},
            `${a.annotator}: class ${a.class_value}` +
              (a.flags.length ? ` [${a.flags.join(", ")}]` : "") +
              (a.mark_for_review ? " (marked)" : ""),
          ),
        ),
      ),
    );
    const input = el("input", { type: "number", min: "0" }) as HTMLInputElement;
    const send = el("button", {}, "Submit consensus");
    send.addEventListener("click", async () => {
      try {
        await board.submitConsensus(item.item_id, Number(input.value));
      } catch (error) {
        if (!(error instanceof ConflictNotice)) throw error;
      }
      await renderBoard(panel, board);
    });
    row.append(el("div", { class: "consensus" }, input, send));
    panel.append(row);
  }
  if (board.items.length === 0) {
    panel.append(el("p", { class: "empty" }, "Nothing contested right now."));
  }
}
