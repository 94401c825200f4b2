import type { ConsultEvent, Tree } from "../src/api.js";

export const DYSPNEA_TREE: Tree = {
  id: "dyspnea",
  title: "Dyspnea differential",
  kind: "differential_diagnosis",
  department: "Department of Internal medicine",
  nodes: [
    { id: 1, kind: "root", text: "dyspnea", parent_id: null, edge_label: null },
    {
      id: 2,
      kind: "condition",
      text: "Have any fever symptom?",
      parent_id: 1,
      edge_label: "next",
    },
    { id: 3, kind: "action", text: "flu workup", parent_id: 2, edge_label: "yes" },
    { id: 4, kind: "action", text: "cardiac workup", parent_id: 2, edge_label: "no" },
  ],
};

export const ASK_EVENT: ConsultEvent = {
  type: "ask",
  node_id: 2,
  question:
    "Regarding your condition: Have any fever symptom? — which applies: " +
    "yes/no? If unsure, say 'I don't know'.",
};

export const DIAGNOSIS_EVENT: ConsultEvent = {
  type: "diagnosis",
  node_id: 3,
  text: "flu workup",
  path: [
    { node_id: 1, label: null },
    { node_id: 2, label: "next" },
    { node_id: 3, label: "yes" },
  ],
};

export const HYPOTHESES_EVENT: ConsultEvent = {
  type: "hypotheses",
  node_id: 2,
  ieet:
    "TREE: Have any fever symptom?\n" +
    "    ACTION: flu workup\n" +
    "    ACTION: cardiac workup\n",
  candidates: ["flu workup", "cardiac workup"],
};

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

/** A fetch stub driven by a url+method -> response table. */
export function mockFetch(
  routes: Record<string, unknown | ((body: unknown) => unknown)>,
  recorded: RecordedRequest[] = [],
) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    recorded.push({ url, method, body });
    const key = `${method} ${url}`;
    if (!(key in routes)) {
      return new Response(
        JSON.stringify({ error: { code: "UNKNOWN_ROUTE", message: key } }),
        { status: 404, headers: { "Content-Type": "application/json" } },
      );
    }
    const value = routes[key];
    const payload = typeof value === "function" ? (value as any)(body) : value;
    if (payload instanceof Response) return payload;
    return new Response(JSON.stringify(payload), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  };
}
