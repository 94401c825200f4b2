import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import {
  ASK_EVENT,
  DIAGNOSIS_EVENT,
  DYSPNEA_TREE,
  mockFetch,
  type RecordedRequest,
} from "./helpers.js";

describe("ApiClient", () => {
  it("lists trees", async () => {
    const api = new ApiClient(
      "",
      mockFetch({
        "GET /api/trees": [
          {
            id: "dyspnea",
            title: "Dyspnea differential",
            kind: "differential_diagnosis",
            department: "Department of Internal medicine",
            node_count: 4,
          },
        ],
      }),
    );
    const trees = await api.listTrees();
    expect(trees).toHaveLength(1);
    expect(trees[0].id).toBe("dyspnea");
  });

  it("fetches a tree by id", async () => {
    const api = new ApiClient(
      "",
      mockFetch({ "GET /api/trees/dyspnea": DYSPNEA_TREE }),
    );
    const tree = await api.getTree("dyspnea");
    expect(tree.nodes).toHaveLength(4);
    expect(tree.nodes[0].kind).toBe("root");
  });

  it("creates a session and posts answers with JSON bodies", async () => {
    const recorded: RecordedRequest[] = [];
    const api = new ApiClient(
      "",
      mockFetch(
        {
          "POST /api/sessions": { session_id: "s1", event: ASK_EVENT },
          "POST /api/sessions/s1/answers": { event: DIAGNOSIS_EVENT },
        },
        recorded,
      ),
    );
    const created = await api.createSession("short of breath", "dyspnea");
    expect(created.session_id).toBe("s1");
    expect(created.event.type).toBe("ask");
    expect(recorded[0].body).toEqual({
      complaint: "short of breath",
      tree_id: "dyspnea",
    });

    const answered = await api.postAnswer("s1", "yes");
    expect(answered.event.type).toBe("diagnosis");
    expect(recorded[1].body).toEqual({ text: "yes" });
  });

  it("omitted tree id is sent as null (automatic retrieval)", async () => {
    const recorded: RecordedRequest[] = [];
    const api = new ApiClient(
      "",
      mockFetch(
        { "POST /api/sessions": { session_id: "s2", event: ASK_EVENT } },
        recorded,
      ),
    );
    await api.createSession("short of breath");
    expect(recorded[0].body).toEqual({
      complaint: "short of breath",
      tree_id: null,
    });
  });

  it("turns error envelopes into ApiError", async () => {
    const api = new ApiClient(
      "",
      mockFetch({
        "GET /api/trees/ghost": new Response(
          JSON.stringify({
            error: { code: "UNKNOWN_TREE", message: "no tree 'ghost'" },
          }),
          { status: 404 },
        ),
      }),
    );
    try {
      await api.getTree("ghost");
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(404);
      expect((err as ApiError).code).toBe("UNKNOWN_TREE");
    }
  });

  it("encodes ids in URL paths", async () => {
    const recorded: RecordedRequest[] = [];
    const api = new ApiClient(
      "",
      mockFetch({ "GET /api/sessions/a%2Fb": { status: "active" } }, recorded),
    );
    await api.getSession("a/b");
    expect(recorded[0].url).toBe("/api/sessions/a%2Fb");
  });
});
