"""IEET: the plain-text if/elif tree form of a guidance tree.

The format is line oriented and indentation structured, designed to be
pasted directly into an LLM prompt:

    TREE: dyspnea
        IF Have any fever symptom? == yes:
            ACTION: flu workup
        ELIF Have any fever symptom? == no:
            ACTION: cardiac workup

One canonical form exists per tree: children in ascending node-id order,
4-space indentation, LF line endings, single trailing newline.  Branch
labels on edges leaving the root are not representable in the text; the
parser assigns them canonically ("next", "next-2", ...), so round-trips
are exact for trees that follow that convention.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Cgt, CgtNode, NodeKind, validate_cgt

INDENT = "    "
SEP = " == "
ELSE_LABEL = "otherwise"


class IeetError(Exception):
    code = "SYNTAX"

    def __init__(self, message: str, line_no: int | None = None, code: str | None = None):
        self.line_no = line_no
        if code is not None:
            self.code = code
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class IeetDocument:
    text: str
    tree_id: str | None = None

    @property
    def line_count(self) -> int:
        return self.text.count("\n")


def _root_label(index: int) -> str:
    return "next" if index == 0 else f"next-{index + 1}"


def _check_serializable(s: str, what: str, is_label: bool) -> None:
    if "\n" in s or "\t" in s or "\r" in s:
        raise IeetError(f"{what} contains newline or tab: {s!r}", code="UNSERIALIZABLE_TEXT")
    if is_label and SEP in s:
        raise IeetError(f"label contains {SEP!r}: {s!r}", code="UNSERIALIZABLE_TEXT")


def serialize(tree: Cgt) -> IeetDocument:
    """Render a valid tree into its canonical text form."""
    report = validate_cgt(tree)
    if not report.ok:
        raise IeetError(f"tree {tree.id!r} is invalid: {sorted(report.codes())}", code="INVALID_TREE")

    lines: list[str] = []
    _check_serializable(tree.root.text, "root text", False)
    lines.append(f"TREE: {tree.root.text}")

    def emit(node: CgtNode, depth: int) -> None:
        pad = INDENT * depth
        if node.kind is NodeKind.ACTION:
            _check_serializable(node.text, "action text", False)
            lines.append(f"{pad}ACTION: {node.text}")
            return
        _check_serializable(node.text, "condition text", False)
        for i, child in enumerate(tree.children(node.id)):
            kw = "IF" if i == 0 else "ELIF"
            label = child.edge_label or ""
            _check_serializable(label, "branch label", True)
            if not label:
                raise IeetError(f"node {child.id} has no branch label", code="UNSERIALIZABLE_TEXT")
            lines.append(f"{pad}{kw} {node.text}{SEP}{label}:")
            emit(child, depth + 1)

    for child in tree.children(tree.root.id):
        emit(child, 1)
    return IeetDocument(text="\n".join(lines) + "\n", tree_id=tree.id)


@dataclass
class _Item:
    """One parsed line."""

    depth: int
    kw: str  # TREE | IF | ELIF | ELSE | ACTION
    text: str
    label: str | None
    line_no: int


def _parse_line(raw: str, line_no: int) -> _Item:
    stripped = raw.lstrip(" ")
    pad = len(raw) - len(stripped)
    if pad % 4 != 0:
        raise IeetError(f"indent of {pad} spaces is not a multiple of 4", line_no)
    depth = pad // 4
    if stripped != stripped.strip():
        raise IeetError("trailing whitespace", line_no)

    if stripped.startswith("TREE: "):
        text = stripped[len("TREE: "):]
        if not text:
            raise IeetError("empty tree text", line_no)
        return _Item(depth, "TREE", text, None, line_no)
    if stripped.startswith("ACTION: "):
        text = stripped[len("ACTION: "):]
        if not text:
            raise IeetError("empty action text", line_no)
        return _Item(depth, "ACTION", text, None, line_no)
    if stripped == "ELSE:":
        return _Item(depth, "ELSE", "", ELSE_LABEL, line_no)
    for kw in ("IF ", "ELIF "):
        if stripped.startswith(kw):
            body = stripped[len(kw):]
            if not body.endswith(":"):
                raise IeetError("missing trailing colon", line_no)
            body = body[:-1]
            pos = body.rfind(SEP)
            if pos < 0:
                raise IeetError(f"missing {SEP!r} separator", line_no)
            text, label = body[:pos], body[pos + len(SEP):]
            if not text:
                raise IeetError("empty condition text", line_no)
            if not label:
                raise IeetError("empty branch label", line_no)
            return _Item(depth, kw.strip(), text, label, line_no)
    raise IeetError(f"unknown keyword in {stripped[:40]!r}", line_no)


def parse(doc: str | IeetDocument, tree_id: str = "parsed",
          title: str = "", kind: str = "differential_diagnosis",
          department: str = "") -> Cgt:
    """Parse IEET text back into a tree; ids are assigned in pre-order from 1."""
    text = doc.text if isinstance(doc, IeetDocument) else doc
    raw_lines = text.split("\n")
    if raw_lines and raw_lines[-1] == "":
        raw_lines = raw_lines[:-1]
    items = []
    for i, raw in enumerate(raw_lines, start=1):
        if raw.strip() == "":
            raise IeetError("blank line", i)
        items.append(_parse_line(raw, i))
    if not items:
        raise IeetError("empty document", 1)
    if items[0].kw != "TREE" or items[0].depth != 0:
        raise IeetError("document must start with an unindented TREE line", items[0].line_no)
    if any(it.kw == "TREE" for it in items[1:]):
        extra = next(it for it in items[1:] if it.kw == "TREE")
        raise IeetError("TREE line may only appear once", extra.line_no)

    nodes: list[CgtNode] = []
    next_id = 1

    def new_node(kind_: NodeKind, text_: str, parent_id: int | None, label: str | None) -> int:
        nonlocal next_id
        nid = next_id
        next_id += 1
        nodes.append(CgtNode(id=nid, kind=kind_, text=text_, parent_id=parent_id, edge_label=label))
        return nid

    root_id = new_node(NodeKind.ROOT, items[0].text, None, None)

    pos = 1

    def parse_children(parent_id: int, depth: int, root_level: bool) -> int:
        """Parse the block of items at ``depth`` under ``parent_id``.

        Returns the number of children attached.  At root level several
        children are allowed; inside a clause body exactly one is.
        """
        nonlocal pos
        count = 0
        while pos < len(items) and items[pos].depth >= depth:
            it = items[pos]
            if it.depth > depth:
                raise IeetError("unexpected indent", it.line_no)
            if not root_level and count >= 1:
                raise IeetError("a branch may contain only one child node", it.line_no)
            if it.kw == "ACTION":
                pos += 1
                new_node(NodeKind.ACTION, it.text,
                         parent_id, _root_label(count) if root_level else _pending_label.pop())
                count += 1
            elif it.kw == "IF":
                label = _root_label(count) if root_level else _pending_label.pop()
                cond_id = new_node(NodeKind.CONDITION, it.text, parent_id, label)
                parse_clauses(cond_id, it.text, depth)
                count += 1
            elif it.kw in ("ELIF", "ELSE"):
                raise IeetError(f"{it.kw} without a preceding IF at this indent", it.line_no)
            else:
                raise IeetError(f"unexpected {it.kw} line", it.line_no)
        return count

    _pending_label: list[str] = []

    def parse_clauses(cond_id: int, cond_text: str, depth: int) -> None:
        """Consume the IF/ELIF/ELSE clause group of one condition node."""
        nonlocal pos
        labels_seen: set[str] = set()
        first = True
        while pos < len(items) and items[pos].depth == depth and (
            (first and items[pos].kw == "IF") or (not first and items[pos].kw in ("ELIF", "ELSE"))
        ):
            it = items[pos]
            if it.kw in ("ELIF",) and it.text != cond_text:
                break  # a new sibling group would need IF; mismatched ELIF is an error below
            label = it.label or ""
            if label in labels_seen:
                raise IeetError(f"duplicate branch label {label!r}", it.line_no)
            labels_seen.add(label)
            pos += 1
            _pending_label.append(label)
            n = parse_children(cond_id, depth + 1, root_level=False)
            if n == 0:
                _pending_label.pop()
                raise IeetError("branch has no body", it.line_no)
            first = False
        # A mismatched ELIF right here is an orphan.
        if pos < len(items) and items[pos].depth == depth and items[pos].kw == "ELIF" \
                and items[pos].text != cond_text:
            raise IeetError(
                f"ELIF condition {items[pos].text!r} does not match {cond_text!r}",
                items[pos].line_no)

    n_root_children = parse_children(root_id, 1, root_level=True)
    if pos < len(items):
        raise IeetError("unreachable content", items[pos].line_no)
    if n_root_children == 0 and len(items) > 1:
        raise IeetError("no content under TREE line", items[0].line_no)

    tree = Cgt(id=tree_id, title=title or items[0].text, kind=kind,
               department=department, nodes=tuple(nodes))
    report = validate_cgt(tree)
    if not report.ok:
        raise IeetError(f"parsed tree is invalid: {sorted(report.codes())}")
    return tree
