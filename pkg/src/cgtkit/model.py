"""Clinical guidance tree (CGT) data model, validation, and JSON I/O.

A CGT is a multi-branch decision tree whose nodes carry natural-language
text.  Node kinds are ``root`` (chief symptom or disease name),
``condition`` (internal question nodes), and ``action`` (leaf outcomes:
diagnoses or treatment steps).  Parent links and branch labels are stored
on the child node, so a tree file is self-contained.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable


class NodeKind(str, Enum):
    ROOT = "root"
    CONDITION = "condition"
    ACTION = "action"


TREE_KINDS = ("differential_diagnosis", "treatment_suggestion")
SHAPE_CLASSES = ("process", "decision", "start_end", "scan")


class CgtError(Exception):
    """Base error; ``code`` is a stable machine-readable identifier."""

    code = "CGT_ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class UnknownNodeError(CgtError):
    code = "UNKNOWN_NODE"


class InvalidTreeError(CgtError):
    code = "INVALID_TREE"


@dataclass(frozen=True)
class CgtNode:
    """One tree node.  ``parent_id`` and ``edge_label`` are None only for root.

    ``edge_label`` is the branch answer on the edge from the parent into this
    node.  ``is_reference`` marks terminal copies created by cycle elimination.
    """

    id: int
    kind: NodeKind
    text: str
    parent_id: int | None = None
    edge_label: str | None = None
    shape_class: str | None = None
    is_reference: bool = False


@dataclass(frozen=True)
class Violation:
    code: str
    node_id: int | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


@dataclass(frozen=True)
class Cgt:
    """An immutable guidance tree plus its catalog metadata."""

    id: str
    title: str
    kind: str
    department: str
    source: Any = ""
    nodes: tuple[CgtNode, ...] = ()

    def __post_init__(self):
        if not isinstance(self.nodes, tuple):
            object.__setattr__(self, "nodes", tuple(self.nodes))

    @cached_property
    def by_id(self) -> dict[int, CgtNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def children_map(self) -> dict[int, tuple[CgtNode, ...]]:
        kids: dict[int, list[CgtNode]] = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            if n.parent_id is not None and n.parent_id in kids:
                kids[n.parent_id].append(n)
        return {k: tuple(sorted(v, key=lambda n: n.id)) for k, v in kids.items()}

    @cached_property
    def root(self) -> CgtNode:
        roots = [n for n in self.nodes if n.parent_id is None]
        if len(roots) != 1:
            raise InvalidTreeError(f"tree {self.id!r} has {len(roots)} root nodes")
        return roots[0]

    def children(self, node_id: int) -> tuple[CgtNode, ...]:
        return self.children_map.get(node_id, ())

    def node(self, node_id: int) -> CgtNode:
        try:
            return self.by_id[node_id]
        except KeyError:
            raise UnknownNodeError(f"node {node_id} not in tree {self.id!r}") from None


def _bad_text(s: str | None) -> bool:
    return not s or "\n" in s or "\t" in s or "\r" in s


def validate_cgt(tree: Cgt) -> ValidationReport:
    """Check every structural invariant of a candidate tree.

    Nothing is raised: problems come back as coded violations.  A root node
    with no children is accepted (degenerate single-node tree), since every
    subtree of a valid tree must itself validate.
    """
    out: list[Violation] = []

    seen: set[int] = set()
    for n in tree.nodes:
        if n.id in seen:
            out.append(Violation("DUPLICATE_ID", n.id, f"node id {n.id} occurs more than once"))
        seen.add(n.id)
        if _bad_text(n.text):
            out.append(Violation("EMPTY_TEXT", n.id, "node text empty or contains newline/tab"))
        if n.parent_id is not None and _bad_text(n.edge_label):
            out.append(Violation("EMPTY_TEXT", n.id, "edge label missing, empty, or malformed"))

    roots = [n for n in tree.nodes if n.parent_id is None]
    if not roots:
        out.append(Violation("NO_ROOT", None, "no node without a parent"))
        return ValidationReport(tuple(out))
    if len(roots) > 1:
        for n in roots[1:]:
            out.append(Violation("MULTI_ROOT", n.id, "more than one node without a parent"))
    root = roots[0]
    if root.kind is not NodeKind.ROOT:
        out.append(Violation("INTERNAL_NOT_CONDITION", root.id, f"root node has kind {root.kind.value!r}"))

    ids = {n.id for n in tree.nodes}
    for n in tree.nodes:
        if n.parent_id is not None and n.parent_id not in ids:
            out.append(Violation("DANGLING_PARENT", n.id, f"parent {n.parent_id} does not exist"))

    # Cycle check over parent links: follow each chain up with a visited set.
    state: dict[int, int] = {}  # 0 = in progress, 1 = done
    for n in tree.nodes:
        chain = []
        cur: CgtNode | None = n
        while cur is not None and cur.id not in state:
            state[cur.id] = 0
            chain.append(cur.id)
            cur = tree.by_id.get(cur.parent_id) if cur.parent_id is not None else None
        if cur is not None and state.get(cur.id) == 0:
            out.append(Violation("CYCLE", cur.id, "parent links form a cycle"))
        for i in chain:
            state[i] = 1

    # Reachability from the designated root.
    if not any(v.code in ("CYCLE", "DANGLING_PARENT", "DUPLICATE_ID") for v in out):
        reach = {root.id}
        stack = [root.id]
        while stack:
            for c in tree.children(stack.pop()):
                if c.id not in reach:
                    reach.add(c.id)
                    stack.append(c.id)
        for n in tree.nodes:
            if n.id not in reach and n.parent_id is not None:
                out.append(Violation("DISCONNECTED", n.id, "node unreachable from root"))

    for n in tree.nodes:
        kids = tree.children(n.id)
        if not kids and n.parent_id is not None and n.kind is not NodeKind.ACTION:
            out.append(Violation("LEAF_NOT_ACTION", n.id, "leaf node is not an action"))
        if kids and n.parent_id is not None and n.kind is not NodeKind.CONDITION:
            out.append(Violation("INTERNAL_NOT_CONDITION", n.id, "internal node is not a condition"))
        labels = [c.edge_label for c in kids if c.edge_label is not None]
        if len(labels) != len(set(labels)):
            out.append(Violation("DUP_SIBLING_LABEL", n.id, "sibling branch labels are not distinct"))

    return ValidationReport(tuple(out))


def subtree(tree: Cgt, node_id: int) -> Cgt:
    """Extract the subtree rooted at ``node_id`` as a standalone tree.

    The chosen node is re-kinded to root (parent link and branch label
    cleared); descendant ids are preserved.
    """
    top = tree.node(node_id)
    keep: list[CgtNode] = [replace(top, kind=NodeKind.ROOT, parent_id=None, edge_label=None)]
    stack = [node_id]
    while stack:
        for c in tree.children(stack.pop()):
            keep.append(c)
            stack.append(c.id)
    keep.sort(key=lambda n: n.id)
    return Cgt(id=tree.id, title=tree.title, kind=tree.kind,
               department=tree.department, source=tree.source, nodes=tuple(keep))


def paths(tree: Cgt) -> list[list[tuple[str, str | None]]]:
    """All root-to-leaf paths as (node text, branch label into the node).

    Depth-first, children in ascending id order.  Raises InvalidTreeError on
    a tree that fails validation.
    """
    report = validate_cgt(tree)
    if not report.ok:
        raise InvalidTreeError(f"tree {tree.id!r} is invalid: {sorted(report.codes())}")
    out: list[list[tuple[str, str | None]]] = []

    def walk(node: CgtNode, prefix: list[tuple[str, str | None]]):
        here = prefix + [(node.text, node.edge_label)]
        kids = tree.children(node.id)
        if not kids:
            out.append(here)
            return
        for c in kids:
            walk(c, here)

    walk(tree.root, [])
    return out


# ---------------------------------------------------------------------------
# JSON serialization

def node_to_dict(n: CgtNode) -> dict:
    d: dict[str, Any] = {
        "id": n.id,
        "kind": n.kind.value,
        "text": n.text,
        "parent_id": n.parent_id,
        "edge_label": n.edge_label,
    }
    if n.shape_class is not None:
        d["shape_class"] = n.shape_class
    if n.is_reference:
        d["is_reference"] = True
    return d


def node_from_dict(d: dict) -> CgtNode:
    return CgtNode(
        id=int(d["id"]),
        kind=NodeKind(d["kind"]),
        text=d["text"],
        parent_id=d.get("parent_id"),
        edge_label=d.get("edge_label"),
        shape_class=d.get("shape_class"),
        is_reference=bool(d.get("is_reference", False)),
    )


def cgt_to_dict(tree: Cgt) -> dict:
    return {
        "id": tree.id,
        "title": tree.title,
        "kind": tree.kind,
        "department": tree.department,
        "source": tree.source,
        "nodes": [node_to_dict(n) for n in sorted(tree.nodes, key=lambda n: n.id)],
    }


def cgt_from_dict(d: dict) -> Cgt:
    return Cgt(
        id=str(d["id"]),
        title=d.get("title", ""),
        kind=d.get("kind", "differential_diagnosis"),
        department=d.get("department", ""),
        source=d.get("source", ""),
        nodes=tuple(node_from_dict(n) for n in d["nodes"]),
    )


def save_cgt(tree: Cgt, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(cgt_to_dict(tree), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def load_cgt(path: str | Path) -> Cgt:
    return cgt_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_kb(directory: str | Path) -> dict[str, Cgt]:
    """Load a knowledge base: every ``*.cgt.json`` file in a directory.

    If ``manifest.json`` is present and lists ids, only those trees are
    loaded (missing files raise).
    """
    directory = Path(directory)
    wanted: list[str] | None = None
    manifest = directory / "manifest.json"
    if manifest.exists():
        data = json.loads(manifest.read_text(encoding="utf-8"))
        entries = data.get("trees", data) if isinstance(data, dict) else data
        ids = []
        for e in entries:
            ids.append(e["id"] if isinstance(e, dict) else str(e))
        wanted = ids

    kb: dict[str, Cgt] = {}
    for path in sorted(directory.glob("*.cgt.json")):
        tree = load_cgt(path)
        kb[tree.id] = tree
    if wanted is not None:
        missing = [i for i in wanted if i not in kb]
        if missing:
            raise CgtError(f"manifest lists trees with no file: {missing}", code="MISSING_TREE")
        kb = {i: kb[i] for i in wanted}
    return kb
