"""Acceptance gate: eight end-to-end criteria, one pass/fail line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines live.
"""

import json
import random
import threading
import time
from contextlib import contextmanager

import numpy as np
import pytest
from fastapi.testclient import TestClient

from cgtkit import ieet
from cgtkit.clustering import NOISE, dbscan
from cgtkit.engine import (
    UNABLE,
    ScriptedJudge,
    answer,
    event_to_dict,
    match,
    start,
)
from cgtkit.flowgraph import FlowEdge, FlowGraph, FlowNode, reconstruct
from cgtkit.model import validate_cgt
from cgtkit.retrieval import build_index, cosine, retrieve
from cgtkit.service import ServiceConfig, create_app
from cgtkit.synthgen import GenParams, exact_match, f1_score, gen_case, recovery_counts
from cgtkit.transform import (
    TransformError,
    TreeMeta,
    eliminate_cycles,
    has_cycle,
    replicate_shared_children,
    to_cgt,
)
from conftest import make_dyspnea, make_knee, random_tree, tree_shape


@contextmanager
def criterion(n, name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {n}: {name}")
        raise
    print(f"[PASS] criterion {n}: {name}")


# --- 1. IEET round trip -------------------------------------------------------

def test_criterion_1_ieet_round_trip():
    with criterion(1, "IEET round trip, 1000 random trees, < 10 s"):
        rng = random.Random(20240601)
        t0 = time.perf_counter()
        for i in range(1000):
            tree = random_tree(rng, max_depth=6, max_branch=4, tree_id=f"rt-{i}")
            doc = ieet.serialize(tree)
            back = ieet.parse(doc, tree_id=tree.id)
            assert tree_shape(back) == tree_shape(tree)
            assert ieet.serialize(back).text == doc.text
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"took {elapsed:.1f} s"


# --- 2. DBSCAN vs brute force ---------------------------------------------------

def _dbscan_oracle(points, eps, min_pts):
    """Vectorized brute-force reference, independent of the kernel."""
    n = len(points)
    if n == 0:
        return []
    arr = np.asarray(points, dtype=np.float64)
    d2 = ((arr[:, None, :] - arr[None, :, :]) ** 2).sum(axis=2)
    within = d2 <= eps * eps
    core = within.sum(axis=1) >= min_pts

    comp = {}
    cid = 0
    for i in range(n):
        if not core[i] or i in comp:
            continue
        comp[i] = cid
        stack = [i]
        while stack:
            a = stack.pop()
            for b in np.nonzero(within[a] & core)[0]:
                if b not in comp:
                    comp[int(b)] = cid
                    stack.append(int(b))
        cid += 1

    labels = [NOISE] * n
    for i in range(n):
        if core[i]:
            labels[i] = comp[i]
            continue
        best = None
        for j in np.nonzero(within[i] & core)[0]:
            cand = (d2[i, j], comp[int(j)])
            if best is None or cand < best:
                best = cand
        if best is not None:
            labels[i] = best[1]
    return labels


def test_criterion_2_dbscan_exact():
    with criterion(2, "DBSCAN matches brute force on 1000 point sets, < 30 s"):
        dbscan([(0.0, 0.0)], eps=1.0, min_pts=1)  # trigger any JIT warm-up
        rng = random.Random(20240602)
        t0 = time.perf_counter()
        for _ in range(1000):
            n = rng.randint(0, 200)
            pts = [(rng.uniform(0, 60), rng.uniform(0, 60)) for _ in range(n)]
            eps = rng.uniform(0.5, 10.0)
            min_pts = rng.randint(1, 6)
            assert dbscan(pts, eps, min_pts) == _dbscan_oracle(pts, eps, min_pts)
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"took {elapsed:.1f} s"


# --- 3. synthetic reconstruction ------------------------------------------------

def test_criterion_3_reconstruction_recovery():
    with criterion(3, "synthetic recovery: 500/500 exact at zero jitter, "
                      "F1 >= 0.99 at jitter 2, < 60 s"):
        t0 = time.perf_counter()
        for seed in range(500):
            det, truth = gen_case(GenParams(seed=seed))
            got, _ = reconstruct(det)
            assert exact_match(truth.graph, got), f"seed {seed} not exact"

        tp = n_truth = n_got = 0
        for seed in range(500):
            det, truth = gen_case(GenParams(seed=seed, jitter=2.0))
            got, _ = reconstruct(det)
            a, b, c = recovery_counts(truth.graph, got)
            tp, n_truth, n_got = tp + a, n_truth + b, n_got + c
        f1 = f1_score(tp, n_truth, n_got)
        assert f1 >= 0.99, f"jittered F1 = {f1:.4f}"
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0, f"took {elapsed:.1f} s"


# --- 4. transform pipeline ------------------------------------------------------

def _rand_graph(rng):
    n = rng.randint(1, 12)
    nodes = tuple(
        FlowNode(id=i, shape_class="process", text=f"n{i}", bbox=(0, 0, 1, 1))
        for i in range(n))
    edges = set()
    for _ in range(rng.randint(0, 2 * n)):
        edges.add((rng.randrange(n), rng.randrange(n)))
    return FlowGraph(nodes=nodes, edges=tuple(
        FlowEdge(src=a, dst=b, label=None) for a, b in sorted(edges)))


def _paths(g):
    from collections import Counter
    out = {}
    for e in g.edges:
        out.setdefault(e.src, []).append(e)
    for es in out.values():
        es.sort(key=lambda e: (e.dst, e.label or ""))
    text = {n.id: n.text for n in g.nodes}
    indeg = {n.id: 0 for n in g.nodes}
    for e in g.edges:
        indeg[e.dst] += 1
    acc = Counter()

    def walk(i, prefix):
        prefix = prefix + (text[i],)
        es = out.get(i, [])
        if not es:
            acc[prefix] += 1
        for e in es:
            walk(e.dst, prefix)

    for r in sorted(i for i, d in indeg.items() if d == 0):
        walk(r, ())
    return acc


def test_criterion_4_transform_invariants():
    with criterion(4, "transform invariants over 1000 random graphs"):
        rng = random.Random(20240604)
        for _ in range(1000):
            g = _rand_graph(rng)

            acyclic = eliminate_cycles(g)
            assert not has_cycle(acyclic)

            before = _paths(acyclic)
            if sum(before.values()) <= 4096:
                try:
                    replicated = replicate_shared_children(acyclic)
                except TransformError as e:
                    assert e.code == "SIZE_LIMIT"
                else:
                    assert _paths(replicated) == before

            try:
                tree, _ = to_cgt(g, TreeMeta(id="t", title="fuzz"))
            except TransformError as e:
                assert e.code in ("SIZE_LIMIT",)
            else:
                assert validate_cgt(tree).ok


# --- 5. engine traces -----------------------------------------------------------

FEVER_Q = ("Regarding your condition: Have any fever symptom? — which applies: "
           "yes/no? If unsure, say 'I don't know'.")


def _run(judge, replies):
    kb = {"dyspnea": make_dyspnea()}
    session, ev = start(kb, "short of breath", judge, tree_id="dyspnea",
                        session_id="fixed")
    events = [ev]
    for r in replies:
        events.append(answer(session, r, judge))
    return json.dumps([event_to_dict(e) for e in events], sort_keys=True)


def test_criterion_5_engine_traces():
    with criterion(5, "engine traces a/b/c byte-stable on the dyspnea fixture"):
        # (a) immediate diagnosis
        mk_a = lambda: ScriptedJudge({"Have any fever symptom?": "yes"})
        ta = _run(mk_a(), [])
        assert ta == _run(mk_a(), [])
        assert json.loads(ta) == [{
            "type": "diagnosis", "node_id": 3, "text": "flu workup",
            "path": [{"node_id": 1, "label": None},
                     {"node_id": 2, "label": "next"},
                     {"node_id": 3, "label": "yes"}]}]

        # (b) unable once, ask, informative reply, diagnosis
        mk_b = lambda: ScriptedJudge({"Have any fever symptom?": ["UNABLE", "yes"]})
        tb = _run(mk_b(), ["yes, I do have a fever"])
        assert tb == _run(mk_b(), ["yes, I do have a fever"])
        evs = json.loads(tb)
        assert [e["type"] for e in evs] == ["ask", "diagnosis"]
        assert evs[0]["question"] == FEVER_Q

        # (c) unable, ask, "I don't know" -> hypotheses
        mk_c = lambda: ScriptedJudge({})
        tc = _run(mk_c(), ["I don't know"])
        assert tc == _run(mk_c(), ["I don't know"])
        evs = json.loads(tc)
        assert [e["type"] for e in evs] == ["ask", "hypotheses"]
        assert evs[1]["candidates"] == ["flu workup", "cardiac workup"]
        assert evs[1]["ieet"].startswith("TREE: Have any fever symptom?")


# --- 6. retrieval ---------------------------------------------------------------

def test_criterion_6_retrieval():
    with criterion(6, "cosine properties on 1000 pairs (1e-9), fixture ranking"):
        rng = random.Random(20240606)
        for _ in range(1000):
            n = rng.randint(1, 16)
            x = [rng.uniform(-10, 10) for _ in range(n)]
            y = [rng.uniform(-10, 10) for _ in range(n)]
            c = cosine(x, y)
            assert -1.0 - 1e-9 <= c <= 1.0 + 1e-9
            assert abs(c - cosine(y, x)) <= 1e-9
            s = rng.uniform(0.1, 10.0)
            assert abs(c - cosine([s * v for v in x], y)) <= 1e-9
            if any(x):
                assert abs(cosine(x, x) - 1.0) <= 1e-9

        idx = build_index([make_dyspnea(), make_knee()])
        ranked = retrieve(idx, "trouble breathing with fever", k=2)
        assert [tid for tid, _ in ranked] == ["dyspnea", "knee-pain"]
        assert ranked[0][1] > ranked[1][1]
        # Ties (zero scores) break by ascending tree id.
        assert retrieve(idx, "qqqunmatched", k=2) == \
            [("dyspnea", 0.0), ("knee-pain", 0.0)]


# --- 7. catalog stats -----------------------------------------------------------

DEPT_COUNTS = [
    ("Department of Internal medicine", 167, 36),
    ("Department of surgery", 59, 6),
    ("Department of pediatrics", 5, 52),
    ("Department of Obstetrics and gynecology", 7, 131),
    ("Emergency Department", 72, 12),
    ("Department of psychiatry", 2, 18),
    ("Department of Anesthesiology", 28, 221),
    ("Department of Dermatology", 2, 1),
    ("Department of Five Senses", 79, 119),
    ("Department of Oncology", 10, 110),
    ("Department of Infectious Diseases", 7, 30),
    ("Preventive Care Division", 5, 23),
]


def test_criterion_7_catalog_stats(tmp_path):
    with criterion(7, "catalog stats: 443 differential / 759 treatment / 1202 total"):
        from cgtkit.cli import compute_stats
        entries = []
        i = 0
        for dept, nd, nt in DEPT_COUNTS:
            for kind, count in (("differential_diagnosis", nd),
                                ("treatment_suggestion", nt)):
                for _ in range(count):
                    entries.append({"id": f"t{i}", "kind": kind, "department": dept})
                    i += 1
        (tmp_path / "manifest.json").write_text(json.dumps({"trees": entries}))
        table = compute_stats(tmp_path)
        assert table.total_diff == 443
        assert table.total_treat == 759
        assert table.total == 1202


# --- 8. service contract --------------------------------------------------------

def test_criterion_8_service_contract():
    with criterion(8, "HTTP contract incl. concurrent answers -> one 200, one 409"):
        release = threading.Event()

        class GateJudge:
            def __init__(self):
                self.calls = 0

            def __call__(self, condition_text, labels, complaint, history):
                self.calls += 1
                if self.calls == 1:
                    return UNABLE
                release.wait(timeout=5)
                return match("yes")

        kb = {"dyspnea": make_dyspnea(), "knee-pain": make_knee()}
        app = create_app(ServiceConfig(), kb=kb, judge=GateJudge())
        c = TestClient(app)

        assert c.get("/api/health").json() == {"status": "ok"}
        trees = c.get("/api/trees").json()
        assert [t["id"] for t in trees] == ["dyspnea", "knee-pain"]
        assert c.get("/api/trees/dyspnea").json()["id"] == "dyspnea"
        assert c.get("/api/trees/dyspnea/ieet").text.startswith("TREE: dyspnea\n")
        assert c.get("/api/trees/ghost").json()["error"]["code"] == "UNKNOWN_TREE"
        r = c.post("/api/retrieve", json={"query": "fever breathing", "k": 1})
        assert r.json()[0]["tree_id"] == "dyspnea"
        assert c.post("/api/sessions", json={"complaint": " "}).status_code == 422

        body = c.post("/api/sessions", json={"complaint": "short of breath",
                                             "tree_id": "dyspnea"}).json()
        sid = body["session_id"]
        assert body["event"]["type"] == "ask"
        assert c.get(f"/api/sessions/{sid}").json()["status"] == "awaiting_answer"

        results = []

        def hit():
            results.append(
                c.post(f"/api/sessions/{sid}/answers", json={"text": "it varies"}))

        threads = [threading.Thread(target=hit) for _ in range(2)]
        for t in threads:
            t.start()
        time.sleep(0.3)
        release.set()
        for t in threads:
            t.join(timeout=10)
        assert sorted(r.status_code for r in results) == [200, 409]
        busy = next(r for r in results if r.status_code == 409)
        assert busy.json()["error"]["code"] == "SESSION_BUSY"
        winner = next(r for r in results if r.status_code == 200)
        assert winner.json()["event"]["type"] == "diagnosis"

        # A settled session rejects further answers with WRONG_STATE.
        r = c.post(f"/api/sessions/{sid}/answers", json={"text": "more"})
        assert r.status_code == 409
        assert r.json()["error"]["code"] == "WRONG_STATE"
