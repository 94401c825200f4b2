"""Synthetic flowchart generator with paired ground truth.

Emits detection primitives (shapes, connector contours, text boxes), not
pixels: the layout is a top-down grid sized so that, at zero jitter, the
geometric reconstruction pipeline recovers the intended graph exactly.
Connector contours mimic a 3 px-wide drawn line: side points along each
segment plus a small protruding cap at both termini, so endpoint
clustering of the hull vertices is well posed.

Everything is a pure function of the parameters; the same seed yields
byte-identical output.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from .flowgraph import (
    ConnectorDet,
    DetectionFile,
    FlowEdge,
    FlowGraph,
    FlowNode,
    ShapeDet,
    TextDet,
    bbox_overlap,
    point_polyline_dist,
)

SHAPE_W = 120.0
SHAPE_H = 48.0
COL_PITCH = 180.0
ROW_PITCH = 128.0
MARGIN = 40.0
HALF_LINE = 1.5          # half of the simulated line width
ARROW_HALF = 5.0
LABEL_CLEARANCE = 30.0   # min distance from a label to any foreign polyline

WORDS = (
    "fever", "cough", "pain", "rash", "onset", "acute", "chronic", "severe",
    "mild", "check", "scan", "test", "blood", "chest", "renal", "cardiac",
    "treat", "refer", "observe", "review", "stage", "grade", "risk", "dose",
)
LABEL_WORDS = ("yes", "no", "high", "low", "present", "absent")
NODE_CLASSES = ("process", "decision", "start_end", "scan")


class InvalidParamsError(ValueError):
    code = "INVALID_PARAMS"


@dataclass(frozen=True)
class GenParams:
    seed: int = 0
    shape_count: tuple[int, int] = (9, 16)
    branch_factor: tuple[int, int] = (1, 3)
    label_prob: float = 0.3
    extra_edge_prob: float = 0.15
    jitter: float = 0.0
    margin: float = MARGIN

    def check(self) -> None:
        lo, hi = self.shape_count
        if not (2 <= lo <= hi <= 64):
            raise InvalidParamsError(f"shape_count range {self.shape_count} outside [2, 64]")
        blo, bhi = self.branch_factor
        if not (1 <= blo <= bhi):
            raise InvalidParamsError(f"bad branch_factor range {self.branch_factor}")
        if self.jitter < 0:
            raise InvalidParamsError("jitter must be >= 0")
        if not (0.0 <= self.label_prob <= 1.0):
            raise InvalidParamsError("label_prob must be within [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    graph: FlowGraph
    connector_links: tuple[tuple[int, int, int, str | None], ...]  # (connector id, from, to, label)


def _tidy_columns(children: list[list[int]], rows: list[int]) -> list[float]:
    """Leaf nodes get consecutive slots; internals sit over their children."""
    slot = [0.0] * len(rows)
    next_leaf = [0.0]

    def place(i: int) -> float:
        if not children[i]:
            slot[i] = next_leaf[0]
            next_leaf[0] += 1.0
        else:
            xs = [place(c) for c in children[i]]
            slot[i] = sum(xs) / len(xs)
        return slot[i]

    place(0)
    return slot


def _connector_contour(waypoints: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Contour-like point cloud for a drawn line.

    Both side corners at every segment endpoint, single-side samples along
    each segment (isolated enough never to form endpoint clusters of their
    own, but dense enough for edge-label proximity checks), and a dense
    semicircular cap protruding past each terminus so that hull-vertex
    clustering finds both endpoints even under jitter.
    """
    pts: list[tuple[float, float]] = []
    h = HALF_LINE
    for (ax, ay), (bx, by) in zip(waypoints, waypoints[1:]):
        length = math.hypot(bx - ax, by - ay)
        dx, dy = (bx - ax) / length, (by - ay) / length
        px, py = -dy, dx
        for qx, qy in ((ax, ay), (bx, by)):
            pts.append((qx - px * h, qy - py * h))
            pts.append((qx + px * h, qy + py * h))
        t = 4.0
        while t < length:
            pts.append((ax + dx * t + px * h, ay + dy * t + py * h))
            t += 8.0

    for terminus, other in ((waypoints[0], waypoints[1]), (waypoints[-1], waypoints[-2])):
        tx, ty = terminus
        length = math.hypot(other[0] - tx, other[1] - ty)
        ox, oy = (tx - other[0]) / length, (ty - other[1]) / length  # outward
        r = 3.5
        for k in range(13):
            ang = math.radians(-90 + 15 * k)
            ca, sa = math.cos(ang), math.sin(ang)
            rx, ry = ox * ca - oy * sa, ox * sa + oy * ca
            pts.append((tx + r * rx, ty + r * ry))

    # De-duplicate while preserving order.
    seen = set()
    out = []
    for p in pts:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def gen_case(p: GenParams) -> tuple[DetectionFile, GroundTruth]:
    """Generate one synthetic flowchart and its intended graph."""
    p.check()
    rng = random.Random(p.seed)
    n = rng.randint(*p.shape_count)

    # Random tree: each new node hangs under a parent with spare capacity.
    children: list[list[int]] = [[]]
    rows = [0]
    capacity = [rng.randint(*p.branch_factor)]
    for i in range(1, n):
        open_parents = [j for j in range(i) if len(children[j]) < capacity[j]]
        if not open_parents:
            open_parents = list(range(i))
        parent = rng.choice(open_parents)
        children.append([])
        children[parent].append(i)
        rows.append(rows[parent] + 1)
        capacity.append(rng.randint(*p.branch_factor))

    slots = _tidy_columns(children, rows)
    centers = [
        (p.margin + SHAPE_W / 2 + slots[i] * COL_PITCH,
         p.margin + SHAPE_H / 2 + rows[i] * ROW_PITCH)
        for i in range(n)
    ]
    bboxes = [
        (cx - SHAPE_W / 2, cy - SHAPE_H / 2, cx + SHAPE_W / 2, cy + SHAPE_H / 2)
        for cx, cy in centers
    ]

    classes = ["start_end"]
    for i in range(1, n):
        pool = ("decision", "process", "scan") if children[i] else ("process", "start_end")
        classes.append(rng.choice(pool))

    edges: list[tuple[int, int]] = []
    for u in range(n):
        for v in children[u]:
            edges.append((u, v))
    # A few extra forward edges make the graph a DAG rather than a tree.
    if n >= 4 and rng.random() < p.extra_edge_prob:
        candidates = [
            (u, v) for u in range(n) for v in range(n)
            if rows[v] > rows[u] and v not in children[u]
        ]
        if candidates:
            edges.append(rng.choice(candidates))

    out_of: dict[int, list[int]] = {i: [] for i in range(n)}
    in_of: dict[int, list[int]] = {i: [] for i in range(n)}
    for idx, (u, v) in enumerate(edges):
        out_of[u].append(idx)
        in_of[v].append(idx)

    # Connector routing: spread start points across the parent's bottom edge
    # and attach points across the child's top edge.
    start_x: dict[int, float] = {}
    end_x: dict[int, float] = {}
    for u, idxs in out_of.items():
        idxs = sorted(idxs, key=lambda i: centers[edges[i][1]][0])
        usable = SHAPE_W - 30.0
        for k, idx in enumerate(idxs):
            off = 0.0 if len(idxs) == 1 else -usable / 2 + usable * k / (len(idxs) - 1)
            start_x[idx] = centers[u][0] + off
    for v, idxs in in_of.items():
        idxs = sorted(idxs, key=lambda i: centers[edges[i][0]][0])
        for k, idx in enumerate(idxs):
            off = 0.0 if len(idxs) == 1 else -12.0 * (len(idxs) - 1) / 2 + 12.0 * k
            end_x[idx] = centers[v][0] + off

    polylines: list[list[tuple[float, float]]] = []
    for idx, (u, v) in enumerate(edges):
        sx, ex = start_x[idx], end_x[idx]
        sy = bboxes[u][3]
        ey = bboxes[v][1]
        if abs(sx - ex) < 24.0:
            sx = ex  # snap to a straight vertical
            polylines.append([(sx, sy), (ex, ey)])
        else:
            ym = sy + 34.0 + 6.0 * (idx % 3)
            polylines.append([(sx, sy), (sx, ym), (ex, ym), (ex, ey)])

    # Shapes, arrows, node texts.
    shapes = [ShapeDet(id=i, cls=classes[i], bbox=bboxes[i]) for i in range(n)]
    next_shape_id = n
    for idx, (u, v) in enumerate(edges):
        ex, ey = polylines[idx][-1]
        shapes.append(ShapeDet(
            id=next_shape_id, cls="arrow",
            bbox=(ex - ARROW_HALF, ey - 11.0, ex + ARROW_HALF, ey - 1.0)))
        next_shape_id += 1

    texts: list[TextDet] = []
    node_texts: list[str] = []
    next_text_id = 0
    for i in range(n):
        cx, cy = centers[i]
        n_lines = rng.choice((1, 2))
        lines = []
        for ln in range(n_lines):
            words = rng.sample(WORDS, rng.randint(1, 2))
            lines.append(" ".join(words))
        if n_lines == 1:
            boxes = [(cy - 6.0, cy + 6.0)]
        else:
            boxes = [(cy - 18.0, cy - 6.0), (cy + 6.0, cy + 18.0)]
        for line, (ty0, ty1) in zip(lines, boxes):
            w = min(7.0 * len(line), SHAPE_W - 16.0)
            texts.append(TextDet(id=next_text_id,
                                 bbox=(cx - w / 2, ty0, cx + w / 2, ty1), text=line))
            next_text_id += 1
        node_texts.append(" ".join(lines))

    # Optional edge labels, skipped when geometry would make them ambiguous.
    labels: list[str | None] = [None] * len(edges)
    for idx in range(len(edges)):
        if rng.random() >= p.label_prob:
            continue
        word = rng.choice(LABEL_WORDS)
        lx, ly = polylines[idx][0][0], polylines[idx][0][1] + 12.0
        w = max(7.0 * len(word), 14.0)
        box = (lx - w / 2, ly - 6.0, lx + w / 2, ly + 6.0)
        if any(bbox_overlap(box, s.bbox) > 0 for s in shapes):
            continue
        foreign = min(
            (point_polyline_dist((lx, ly), polylines[j])
             for j in range(len(edges)) if j != idx),
            default=LABEL_CLEARANCE + 1,
        )
        if foreign < LABEL_CLEARANCE:
            continue
        labels[idx] = word
        texts.append(TextDet(id=next_text_id, bbox=box, text=word))
        next_text_id += 1

    connectors = [
        ConnectorDet(id=idx, points=tuple(_connector_contour(polylines[idx])))
        for idx in range(len(edges))
    ]

    # Ground truth is recorded before jitter.
    truth_graph = FlowGraph(
        nodes=tuple(FlowNode(id=i, shape_class=classes[i], text=node_texts[i],
                             bbox=bboxes[i]) for i in range(n)),
        edges=tuple(FlowEdge(src=u, dst=v, label=labels[idx])
                    for idx, (u, v) in enumerate(edges)),
    )
    truth_links = tuple((idx, u, v, labels[idx]) for idx, (u, v) in enumerate(edges))

    if p.jitter > 0:
        j = p.jitter

        def jb(bbox):
            return tuple(c + rng.uniform(-j, j) for c in bbox)

        shapes = [replace(s, bbox=jb(s.bbox)) for s in shapes]
        texts = [replace(t, bbox=jb(t.bbox)) for t in texts]
        connectors = [
            replace(c, points=tuple(
                (x + rng.uniform(-j, j), y + rng.uniform(-j, j)) for x, y in c.points))
            for c in connectors
        ]

    all_boxes = [s.bbox for s in shapes] + [t.bbox for t in texts]
    all_pts = [pt for c in connectors for pt in c.points]
    width = int(max(max(b[2] for b in all_boxes),
                    max((x for x, _ in all_pts), default=0)) + p.margin)
    height = int(max(max(b[3] for b in all_boxes),
                     max((y for _, y in all_pts), default=0)) + p.margin)

    det = DetectionFile(
        width=width, height=height, source=f"synthetic seed={p.seed}",
        shapes=tuple(shapes), connectors=tuple(connectors), texts=tuple(texts),
    )
    return det, GroundTruth(graph=truth_graph, connector_links=truth_links)


# ---------------------------------------------------------------------------
# comparison helpers

def _node_keys(g: FlowGraph) -> set[tuple[int, str, str]]:
    return {(n.id, n.shape_class, n.text) for n in g.nodes}


def _edge_keys(g: FlowGraph) -> set[tuple[int, int, str | None]]:
    return {(e.src, e.dst, e.label) for e in g.edges}


def exact_match(truth: FlowGraph, got: FlowGraph) -> bool:
    return _node_keys(truth) == _node_keys(got) and _edge_keys(truth) == _edge_keys(got)


def recovery_counts(truth: FlowGraph, got: FlowGraph) -> tuple[int, int, int]:
    """(true positives, truth items, recovered items) over nodes plus edges."""
    tn, gn = _node_keys(truth), _node_keys(got)
    te, ge = _edge_keys(truth), _edge_keys(got)
    tp = len(tn & gn) + len(te & ge)
    return tp, len(tn) + len(te), len(gn) + len(ge)


def f1_score(tp: int, n_truth: int, n_got: int) -> float:
    if tp == 0:
        return 0.0
    precision = tp / n_got
    recall = tp / n_truth
    return 2 * precision * recall / (precision + recall)


def truth_to_dict(gt: GroundTruth) -> dict:
    from .flowgraph import flowgraph_to_dict

    return {
        "graph": flowgraph_to_dict(gt.graph),
        "connector_links": [
            {"connector_id": c, "from": u, "to": v, "label": l}
            for c, u, v, l in gt.connector_links
        ],
    }
