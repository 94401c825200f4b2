/** Typed client for the guidance-tree HTTP API (everything under /api). */

export interface TreeSummary {
  id: string;
  title: string;
  kind: string;
  department: string;
  node_count: number;
}

export interface TreeNode {
  id: number;
  kind: "root" | "condition" | "action";
  text: string;
  parent_id: number | null;
  edge_label: string | null;
  is_reference?: boolean;
}

export interface Tree {
  id: string;
  title: string;
  kind: string;
  department: string;
  nodes: TreeNode[];
}

export interface AskEvent {
  type: "ask";
  node_id: number;
  question: string;
}

export interface DiagnosisEvent {
  type: "diagnosis";
  node_id: number;
  text: string;
  path: { node_id: number; label: string | null }[];
}

export interface HypothesesEvent {
  type: "hypotheses";
  node_id: number;
  ieet: string;
  candidates: string[];
}

export type ConsultEvent = AskEvent | DiagnosisEvent | HypothesesEvent;

export interface SessionView {
  status: string;
  tree_id: string;
  history: { role: string; text: string; turn: number }[];
  path: { node_id: number; label: string | null }[];
}

export interface RetrievalHit {
  tree_id: string;
  score: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let code = "HTTP_ERROR";
      let message = `${resp.status}`;
      try {
        const body = await resp.json();
        if (body && body.error) {
          code = body.error.code ?? code;
          message = body.error.message ?? message;
        }
      } catch {
        // non-JSON error body; keep the defaults
      }
      throw new ApiError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<{ status: string }> {
    return this.request("/api/health");
  }

  listTrees(): Promise<TreeSummary[]> {
    return this.request("/api/trees");
  }

  getTree(treeId: string): Promise<Tree> {
    return this.request(`/api/trees/${encodeURIComponent(treeId)}`);
  }

  async getTreeIeet(treeId: string): Promise<string> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/api/trees/${encodeURIComponent(treeId)}/ieet`,
    );
    if (!resp.ok) throw new ApiError(resp.status, "HTTP_ERROR", `${resp.status}`);
    return resp.text();
  }

  retrieve(query: string, k = 3): Promise<RetrievalHit[]> {
    return this.post("/api/retrieve", { query, k });
  }

  createSession(
    complaint: string,
    treeId?: string,
  ): Promise<{ session_id: string; event: ConsultEvent }> {
    return this.post("/api/sessions", {
      complaint,
      tree_id: treeId ?? null,
    });
  }

  postAnswer(sessionId: string, text: string): Promise<{ event: ConsultEvent }> {
    return this.post(`/api/sessions/${encodeURIComponent(sessionId)}/answers`, {
      text,
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request(`/api/sessions/${encodeURIComponent(sessionId)}`);
  }
}
