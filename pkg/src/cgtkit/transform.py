"""Normalization of a raw FlowGraph into a valid guidance tree.

Three rewrites run in a fixed order, then nodes are classified:

1. label reconstruction — flowcharts often draw branch answers ("yes",
   "no") as their own boxes; such pass-through nodes are folded into an
   edge label;
2. cycle elimination — repeat-judgment loops are cut by replacing each
   back edge with a terminal reference copy of its target;
3. shared-child replication — any node with several parents is duplicated
   (whole subtree) per parent, turning the DAG into a tree.

Order matters: label folding cannot create cycles, and replication
requires an acyclic input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .flowgraph import FlowEdge, FlowGraph, FlowNode, Warning_
from .model import Cgt, CgtNode, NodeKind, validate_cgt

DEFAULT_LABELS = frozenset({"yes", "no", "y", "n", "是", "否"})
DEFAULT_EDGE_LABEL = "next"
DEFAULT_NODE_TEXT = "unspecified"
DEFAULT_SIZE_LIMIT = 10_000


class TransformError(Exception):
    code = "TRANSFORM_ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


@dataclass(frozen=True)
class LabelLexicon:
    words: frozenset[str] = DEFAULT_LABELS

    def __post_init__(self):
        if not self.words:
            raise TransformError("label lexicon must not be empty", code="EMPTY_LEXICON")
        if any(w != w.lower() for w in self.words):
            raise TransformError("lexicon entries must be lowercase", code="BAD_LEXICON")

    def matches(self, text: str) -> bool:
        return text.strip().lower() in self.words


@dataclass
class TransformReport:
    labels_collapsed: int = 0
    cycles_cut: int = 0
    nodes_replicated: int = 0
    warnings: list[Warning_] = field(default_factory=list)


@dataclass(frozen=True)
class TreeMeta:
    id: str
    title: str
    kind: str = "differential_diagnosis"
    department: str = ""
    source: object = ""


def _in_deg(g: FlowGraph) -> dict[int, int]:
    deg = {n.id: 0 for n in g.nodes}
    for e in g.edges:
        deg[e.dst] += 1
    return deg


def _out_edges(g: FlowGraph) -> dict[int, list[FlowEdge]]:
    out: dict[int, list[FlowEdge]] = {n.id: [] for n in g.nodes}
    for e in g.edges:
        out[e.src].append(e)
    return out


def _in_edges(g: FlowGraph) -> dict[int, list[FlowEdge]]:
    inc: dict[int, list[FlowEdge]] = {n.id: [] for n in g.nodes}
    for e in g.edges:
        inc[e.dst].append(e)
    return inc


def entry_node(g: FlowGraph) -> tuple[int, bool]:
    """Smallest-id source node; falls back to the smallest id overall.

    Returns (node id, fallback used).
    """
    if not g.nodes:
        raise TransformError("graph has no nodes", code="NO_ENTRY")
    deg = _in_deg(g)
    sources = sorted(i for i, d in deg.items() if d == 0)
    if sources:
        return sources[0], False
    return min(deg), True


def reconstruct_labels(g: FlowGraph, lex: LabelLexicon = LabelLexicon()) -> FlowGraph:
    """Fold answer boxes into edge labels, repeatedly until fixpoint.

    A node folds when its text is a lexicon word, it has exactly one
    unlabeled incoming and one unlabeled outgoing edge.  The merged edge
    carries the node's original text (case preserved).
    """
    nodes = list(g.nodes)
    edges = list(g.edges)
    changed = True
    while changed:
        changed = False
        inc: dict[int, list[FlowEdge]] = {n.id: [] for n in nodes}
        out: dict[int, list[FlowEdge]] = {n.id: [] for n in nodes}
        for e in edges:
            inc[e.dst].append(e)
            out[e.src].append(e)
        for node in sorted(nodes, key=lambda n: n.id):
            if not lex.matches(node.text):
                continue
            if len(inc[node.id]) != 1 or len(out[node.id]) != 1:
                continue
            e_in, e_out = inc[node.id][0], out[node.id][0]
            if e_in.label is not None or e_out.label is not None:
                continue
            if e_in.src == node.id or e_out.dst == node.id:
                continue  # self loop, leave for cycle elimination
            merged = FlowEdge(src=e_in.src, dst=e_out.dst, label=node.text.strip())
            nodes = [n for n in nodes if n.id != node.id]
            edges = [e for e in edges if e is not e_in and e is not e_out]
            if merged not in edges:
                edges.append(merged)
            changed = True
            break
    return FlowGraph(nodes=tuple(nodes), edges=tuple(edges))


def eliminate_cycles(g: FlowGraph) -> FlowGraph:
    """Cut every back edge found by DFS, adding a reference copy of its target.

    Traversal starts at the entry node (smallest-id source), children in
    ascending destination id; remaining unvisited nodes are traversed from
    ascending ids so disconnected parts are covered too.
    """
    if not g.nodes:
        return g
    by_id = {n.id: n for n in g.nodes}
    out = _out_edges(g)
    for edges in out.values():
        edges.sort(key=lambda e: (e.dst, e.label or ""))

    start, _ = entry_node(g)
    next_id = max(by_id) + 1
    new_nodes: list[FlowNode] = []
    kept: list[FlowEdge] = []
    replaced: list[FlowEdge] = []

    WHITE, GRAY, BLACK = 0, 1, 2
    color = {i: WHITE for i in by_id}

    def visit(i: int) -> None:
        nonlocal next_id
        color[i] = GRAY
        for e in out[i]:
            if color[e.dst] == GRAY:
                ref = FlowNode(id=next_id, shape_class=by_id[e.dst].shape_class,
                               text=by_id[e.dst].text, bbox=by_id[e.dst].bbox,
                               is_reference=True)
                next_id += 1
                new_nodes.append(ref)
                replaced.append(FlowEdge(src=e.src, dst=ref.id, label=e.label))
            else:
                kept.append(e)
                if color[e.dst] == WHITE:
                    visit(e.dst)
        color[i] = BLACK

    order = [start] + sorted(i for i in by_id if i != start)
    for i in order:
        if color[i] == WHITE:
            visit(i)

    return FlowGraph(nodes=tuple(list(g.nodes) + new_nodes),
                     edges=tuple(kept + replaced))


def has_cycle(g: FlowGraph) -> bool:
    out = _out_edges(g)
    color = {n.id: 0 for n in g.nodes}

    def visit(i: int) -> bool:
        color[i] = 1
        for e in out[i]:
            if color[e.dst] == 1:
                return True
            if color[e.dst] == 0 and visit(e.dst):
                return True
        color[i] = 2
        return False

    return any(color[n.id] == 0 and visit(n.id) for n in g.nodes)


def replicate_shared_children(g: FlowGraph, size_limit: int = DEFAULT_SIZE_LIMIT) -> FlowGraph:
    """Expand an acyclic graph into a forest: one copy of a node per parent.

    Every reachable node is copied once per distinct path prefix, so the
    multiset of source-to-leaf text sequences is preserved exactly.  Fresh
    ids are assigned in depth-first preorder starting at 1.
    """
    if has_cycle(g):
        raise TransformError("input graph has a cycle", code="CYCLIC_INPUT")
    by_id = {n.id: n for n in g.nodes}
    out = _out_edges(g)
    for edges in out.values():
        edges.sort(key=lambda e: (e.dst, e.label or ""))
    deg = _in_deg(g)
    roots = sorted(i for i, d in deg.items() if d == 0)

    nodes: list[FlowNode] = []
    edges: list[FlowEdge] = []
    next_id = 1

    def copy_tree(src_id: int, parent_copy: int | None, label: str | None) -> None:
        nonlocal next_id
        if next_id > size_limit:
            raise TransformError(
                f"replication exceeds {size_limit} nodes", code="SIZE_LIMIT")
        nid = next_id
        next_id += 1
        nodes.append(replace(by_id[src_id], id=nid))
        if parent_copy is not None:
            edges.append(FlowEdge(src=parent_copy, dst=nid, label=label))
        for e in out[src_id]:
            copy_tree(e.dst, nid, e.label)

    for r in roots:
        copy_tree(r, None, None)
    return FlowGraph(nodes=tuple(nodes), edges=tuple(edges))


def _largest_component(g: FlowGraph) -> tuple[FlowGraph, bool]:
    """Keep the largest weakly connected component."""
    ids = [n.id for n in g.nodes]
    adj: dict[int, set[int]] = {i: set() for i in ids}
    for e in g.edges:
        adj[e.src].add(e.dst)
        adj[e.dst].add(e.src)
    seen: set[int] = set()
    comps: list[set[int]] = []
    for i in sorted(ids):
        if i in seen:
            continue
        comp = {i}
        stack = [i]
        while stack:
            for j in adj[stack.pop()]:
                if j not in comp:
                    comp.add(j)
                    stack.append(j)
        seen |= comp
        comps.append(comp)
    if len(comps) <= 1:
        return g, False
    keep = max(comps, key=lambda c: (len(c), -min(c)))
    return FlowGraph(
        nodes=tuple(n for n in g.nodes if n.id in keep),
        edges=tuple(e for e in g.edges if e.src in keep and e.dst in keep),
    ), True


def _sanitize(text: str) -> str:
    cleaned = " ".join(text.split())
    return cleaned if cleaned else DEFAULT_NODE_TEXT


def to_cgt(
    g: FlowGraph,
    meta: TreeMeta,
    lex: LabelLexicon = LabelLexicon(),
    size_limit: int = DEFAULT_SIZE_LIMIT,
) -> tuple[Cgt, TransformReport]:
    """Full pipeline: fold labels, cut cycles, replicate, classify."""
    if not g.nodes:
        raise TransformError("graph has no nodes", code="NO_ENTRY")
    report = TransformReport()

    g, dropped = _largest_component(g)
    if dropped:
        report.warnings.append(Warning_("MULTIPLE_COMPONENTS",
                                        "graph is disconnected; kept the largest component"))

    step1 = reconstruct_labels(g, lex)
    report.labels_collapsed = len(g.nodes) - len(step1.nodes)

    _, fallback = entry_node(step1)
    if fallback:
        report.warnings.append(Warning_("NO_ENTRY",
                                        "no source node; smallest id used as entry"))
    step2 = eliminate_cycles(step1)
    report.cycles_cut = len(step2.nodes) - len(step1.nodes)

    step3 = replicate_shared_children(step2, size_limit)
    report.nodes_replicated = len(step3.nodes) - len(step2.nodes)

    deg = _in_deg(step3)
    roots = sorted(i for i, d in deg.items() if d == 0)
    if len(roots) > 1:
        # Several sources expand into a forest; keep the first tree.
        report.warnings.append(Warning_("EXTRA_ROOTS",
                                        f"{len(roots)} source nodes; kept the tree of node {roots[0]}"))
        keep: set[int] = {roots[0]}
        out = _out_edges(step3)
        stack = [roots[0]]
        while stack:
            for e in out[stack.pop()]:
                if e.dst not in keep:
                    keep.add(e.dst)
                    stack.append(e.dst)
        step3 = FlowGraph(nodes=tuple(n for n in step3.nodes if n.id in keep),
                          edges=tuple(e for e in step3.edges if e.src in keep))
    root_id = roots[0]

    out = _out_edges(step3)
    by_id = {n.id: n for n in step3.nodes}
    if len(step3.nodes) == 1:
        report.warnings.append(Warning_("DEGENERATE_TREE", "single-node graph"))

    parent_of: dict[int, tuple[int, str | None]] = {}
    for e in step3.edges:
        parent_of[e.dst] = (e.src, e.label)

    cgt_nodes: list[CgtNode] = []
    for n in sorted(step3.nodes, key=lambda n: n.id):
        if n.id == root_id:
            kind = NodeKind.ROOT
            parent_id, label = None, None
        else:
            kind = NodeKind.CONDITION if out[n.id] else NodeKind.ACTION
            parent_id, label = parent_of[n.id]
        cgt_nodes.append(CgtNode(
            id=n.id, kind=kind, text=_sanitize(n.text),
            parent_id=parent_id,
            edge_label=None if parent_id is None else _sanitize(label or DEFAULT_EDGE_LABEL),
            shape_class=n.shape_class if n.shape_class in ("process", "decision", "start_end", "scan") else None,
            is_reference=n.is_reference,
        ))

    # Sibling labels must be pairwise distinct; disambiguate deterministically.
    by_parent: dict[int, list[int]] = {}
    for i, n in enumerate(cgt_nodes):
        if n.parent_id is not None:
            by_parent.setdefault(n.parent_id, []).append(i)
    for idxs in by_parent.values():
        seen: dict[str, int] = {}
        for i in sorted(idxs, key=lambda i: cgt_nodes[i].id):
            label = cgt_nodes[i].edge_label or DEFAULT_EDGE_LABEL
            if label in seen:
                seen[label] += 1
                label = f"{label} #{seen[label]}"
            else:
                seen[label] = 1
            cgt_nodes[i] = replace(cgt_nodes[i], edge_label=label)

    tree = Cgt(id=meta.id, title=meta.title, kind=meta.kind,
               department=meta.department, source=meta.source,
               nodes=tuple(cgt_nodes))
    check = validate_cgt(tree)
    if not check.ok:
        raise TransformError(f"pipeline produced an invalid tree: {sorted(check.codes())}",
                             code="INVALID_RESULT")
    return tree, report
