/** DOM wiring: binds the API client and the pure state/render layers to
 * the elements in index.html. */

import { ApiClient, ApiError, type Tree } from "./api.js";
import {
  addPatientMessage,
  applyEvent,
  beginSession,
  initialState,
  quickReplies,
  setError,
  type ConsultState,
} from "./state.js";
import {
  renderDiagnosis,
  renderHypotheses,
  renderMessages,
  renderQuickReplies,
  renderTree,
} from "./treeView.js";

export interface UiElements {
  complaintForm: HTMLFormElement;
  complaintInput: HTMLInputElement;
  treeSelect: HTMLSelectElement;
  chat: HTMLElement;
  replyForm: HTMLFormElement;
  replyInput: HTMLInputElement;
  quickReplies: HTMLElement;
  panel: HTMLElement;
  treePane: HTMLElement;
  status: HTMLElement;
}

export class ConsultApp {
  state: ConsultState = initialState();
  tree: Tree | null = null;

  constructor(
    private api: ApiClient,
    private el: UiElements,
  ) {}

  async init(): Promise<void> {
    const trees = await this.api.listTrees();
    this.el.treeSelect.innerHTML =
      `<option value="">(pick automatically)</option>` +
      trees
        .map((t) => `<option value="${t.id}">${t.id} — ${t.title}</option>`)
        .join("");
    this.el.complaintForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.startConsultation();
    });
    this.el.replyForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.sendReply(this.el.replyInput.value);
    });
    this.el.quickReplies.addEventListener("click", (ev) => {
      const target = ev.target as HTMLElement;
      const label = target.dataset ? target.dataset.label : undefined;
      if (label) void this.sendReply(label);
    });
    this.render();
  }

  async startConsultation(): Promise<void> {
    const complaint = this.el.complaintInput.value.trim();
    if (!complaint) return;
    const treeId = this.el.treeSelect.value || undefined;
    try {
      const { session_id, event } = await this.api.createSession(complaint, treeId);
      this.state = beginSession(this.state, complaint, session_id, null);
      const view = await this.api.getSession(session_id);
      this.state = { ...this.state, treeId: view.tree_id };
      this.tree = await this.api.getTree(view.tree_id);
      this.state = applyEvent(this.state, event);
    } catch (err) {
      this.state = setError(this.state, describe(err));
    }
    this.render();
  }

  async sendReply(text: string): Promise<void> {
    const trimmed = text.trim();
    const sessionId = this.state.sessionId;
    if (!trimmed || !sessionId) return;
    this.el.replyInput.value = "";
    this.state = addPatientMessage(this.state, trimmed);
    this.render();
    try {
      const { event } = await this.api.postAnswer(sessionId, trimmed);
      this.state = applyEvent(this.state, event);
    } catch (err) {
      this.state = setError(this.state, describe(err));
    }
    this.render();
  }

  render(): void {
    const s = this.state;
    this.el.chat.innerHTML = renderMessages(s);
    this.el.chat.scrollTop = this.el.chat.scrollHeight;
    this.el.quickReplies.innerHTML = renderQuickReplies(
      quickReplies(this.tree, s.askNodeId),
    );
    this.el.panel.innerHTML = renderDiagnosis(s) + renderHypotheses(s);
    this.el.treePane.innerHTML = this.tree
      ? renderTree(this.tree, s.diagnosis ? s.diagnosis.path.map((p) => p.node_id) : [])
      : "";
    this.el.status.textContent = statusLine(s);
    const awaiting = s.phase === "awaiting_answer";
    this.el.replyInput.disabled = !awaiting;
    (this.el.replyForm.querySelector("button") as HTMLButtonElement | null)?.toggleAttribute(
      "disabled",
      !awaiting,
    );
  }
}

function statusLine(s: ConsultState): string {
  switch (s.phase) {
    case "idle":
      return "Describe your complaint to begin.";
    case "awaiting_answer":
      return "Please answer the question (quick replies below).";
    case "diagnosed":
      return "Consultation complete.";
    case "hypothesized":
      return "Consultation ended with several possible outcomes.";
    case "error":
      return `Error: ${s.error ?? "unknown"}`;
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}
