/** Pure consultation state: a reducer over API events, no DOM, no fetch. */

import type { ConsultEvent, Tree } from "./api.js";

export interface ChatMessage {
  role: "patient" | "system";
  text: string;
}

export type Phase =
  | "idle"
  | "awaiting_answer"
  | "diagnosed"
  | "hypothesized"
  | "error";

export interface ConsultState {
  phase: Phase;
  sessionId: string | null;
  treeId: string | null;
  messages: ChatMessage[];
  /** node the pending question refers to (for quick replies) */
  askNodeId: number | null;
  diagnosis: { text: string; path: { node_id: number; label: string | null }[] } | null;
  hypotheses: { candidates: string[]; ieet: string } | null;
  error: string | null;
}

export const DONT_KNOW = "I don't know";

export function initialState(): ConsultState {
  return {
    phase: "idle",
    sessionId: null,
    treeId: null,
    messages: [],
    askNodeId: null,
    diagnosis: null,
    hypotheses: null,
    error: null,
  };
}

export function beginSession(
  state: ConsultState,
  complaint: string,
  sessionId: string,
  treeId: string | null,
): ConsultState {
  return {
    ...initialState(),
    sessionId,
    treeId,
    messages: [{ role: "patient", text: complaint }],
  };
}

export function addPatientMessage(state: ConsultState, text: string): ConsultState {
  return { ...state, messages: [...state.messages, { role: "patient", text }] };
}

export function applyEvent(state: ConsultState, event: ConsultEvent): ConsultState {
  switch (event.type) {
    case "ask":
      return {
        ...state,
        phase: "awaiting_answer",
        askNodeId: event.node_id,
        messages: [...state.messages, { role: "system", text: event.question }],
      };
    case "diagnosis":
      return {
        ...state,
        phase: "diagnosed",
        askNodeId: null,
        diagnosis: { text: event.text, path: event.path },
        messages: [
          ...state.messages,
          { role: "system", text: `Recommended: ${event.text}` },
        ],
      };
    case "hypotheses":
      return {
        ...state,
        phase: "hypothesized",
        askNodeId: null,
        hypotheses: { candidates: event.candidates, ieet: event.ieet },
        messages: [
          ...state.messages,
          {
            role: "system",
            text: `Could not narrow down to one outcome; ${event.candidates.length} candidates remain.`,
          },
        ],
      };
  }
}

export function setError(state: ConsultState, message: string): ConsultState {
  return { ...state, phase: "error", error: message };
}

/**
 * Quick-reply labels for the node a question refers to: the edge labels of
 * its children in the tree JSON, plus the don't-know escape hatch.
 */
export function quickReplies(tree: Tree | null, askNodeId: number | null): string[] {
  if (!tree || askNodeId === null) return [];
  const labels = tree.nodes
    .filter((n) => n.parent_id === askNodeId && n.edge_label !== null)
    .sort((a, b) => a.id - b.id)
    .map((n) => n.edge_label as string);
  return labels.length > 0 ? [...labels, DONT_KNOW] : [];
}
