"""Directed-graph reconstruction from flowchart detection primitives.

Inputs are DetectionFiles: shape bounding boxes (with a class such as
process/decision/start_end/scan/arrow), connector contour point sets, and
text boxes.  Neural detection and OCR live upstream; this module is the
geometric half of the pipeline.

Connector resolution: convex hull of the contour points, density
clustering of the hull vertices, cluster centroids as endpoint candidates,
the farthest candidate pair as the termini, nearest-shape attachment, and
arrow-proximity (falling back to the larger-y terminus) for direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

from .clustering import NOISE, dbscan

ARROW = "arrow"
NODE_CLASSES = ("process", "decision", "start_end", "scan")

Bbox = tuple[float, float, float, float]
Point = tuple[float, float]


class FlowgraphError(Exception):
    code = "FLOWGRAPH_ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


@dataclass(frozen=True)
class ShapeDet:
    id: int
    cls: str
    bbox: Bbox
    score: float = 1.0


@dataclass(frozen=True)
class ConnectorDet:
    id: int
    points: tuple[Point, ...]


@dataclass(frozen=True)
class TextDet:
    id: int
    bbox: Bbox
    text: str


@dataclass(frozen=True)
class DetectionFile:
    width: int
    height: int
    source: str
    shapes: tuple[ShapeDet, ...]
    connectors: tuple[ConnectorDet, ...]
    texts: tuple[TextDet, ...]


@dataclass(frozen=True)
class FlowNode:
    id: int
    shape_class: str
    text: str
    bbox: Bbox
    is_reference: bool = False


@dataclass(frozen=True)
class FlowEdge:
    src: int
    dst: int
    label: str | None = None


@dataclass(frozen=True)
class FlowGraph:
    nodes: tuple[FlowNode, ...]
    edges: tuple[FlowEdge, ...]

    def node_ids(self) -> set[int]:
        return {n.id for n in self.nodes}

    def check(self) -> None:
        ids = self.node_ids()
        for e in self.edges:
            if e.src not in ids or e.dst not in ids:
                raise FlowgraphError(f"edge {e} references a missing node", code="BAD_EDGE")
        if len(set(self.edges)) != len(self.edges):
            raise FlowgraphError("duplicate edges", code="BAD_EDGE")


@dataclass(frozen=True)
class ReconstructConfig:
    eps: float = 6.0
    min_pts: int = 2
    attach_dist: float = 15.0
    arrow_dist: float = 12.0
    text_overlap: float = 0.5
    label_dist: float = 10.0


@dataclass(frozen=True)
class Warning_:
    code: str
    detail: str


# ---------------------------------------------------------------------------
# geometry helpers

def convex_hull(points: Sequence[Point]) -> list[Point]:
    """Andrew's monotone chain; collinear inputs reduce to their extremes."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return list(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def point_bbox_dist(p: Point, bbox: Bbox) -> float:
    """Distance to the box; 0 inside."""
    x0, y0, x1, y1 = bbox
    dx = max(x0 - p[0], 0.0, p[0] - x1)
    dy = max(y0 - p[1], 0.0, p[1] - y1)
    return math.hypot(dx, dy)


def bbox_center(bbox: Bbox) -> Point:
    return ((bbox[0] + bbox[2]) / 2.0, (bbox[1] + bbox[3]) / 2.0)


def bbox_area(bbox: Bbox) -> float:
    return max(bbox[2] - bbox[0], 0.0) * max(bbox[3] - bbox[1], 0.0)


def bbox_overlap(a: Bbox, b: Bbox) -> float:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    return max(w, 0.0) * max(h, 0.0)


def point_segment_dist(p: Point, a: Point, b: Point) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / seg2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def point_polyline_dist(p: Point, polyline: Sequence[Point]) -> float:
    if len(polyline) == 1:
        return math.hypot(p[0] - polyline[0][0], p[1] - polyline[0][1])
    return min(point_segment_dist(p, polyline[i], polyline[i + 1])
               for i in range(len(polyline) - 1))


# ---------------------------------------------------------------------------
# operations

def is_flowchart_candidate(d: DetectionFile, min_shapes: int = 8) -> bool:
    """A detection file qualifies when it has enough non-arrow shapes."""
    return sum(1 for s in d.shapes if s.cls != ARROW) >= min_shapes


@dataclass(frozen=True)
class ConnectorLink:
    connector_id: int
    src: int          # shape id at the tail
    dst: int          # shape id at the head
    tail: Point
    head: Point


def resolve_connectors(
    d: DetectionFile, cfg: ReconstructConfig = ReconstructConfig()
) -> tuple[list[ConnectorLink], list[Warning_]]:
    """Turn each connector contour into a directed shape-to-shape link."""
    node_shapes = [s for s in d.shapes if s.cls != ARROW]
    if not node_shapes:
        raise FlowgraphError("no non-arrow shapes to attach connectors to", code="NO_SHAPES")
    arrows = [s for s in d.shapes if s.cls == ARROW]

    links: list[ConnectorLink] = []
    warnings: list[Warning_] = []
    for conn in d.connectors:
        hull = convex_hull(conn.points)
        labels = dbscan(hull, cfg.eps, cfg.min_pts)
        clusters: dict[int, list[Point]] = {}
        for pt, lab in zip(hull, labels):
            if lab != NOISE:
                clusters.setdefault(lab, []).append(pt)
        centroids = [
            (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts))
            for _, pts in sorted(clusters.items())
        ]
        if len(centroids) < 2:
            warnings.append(Warning_(
                "DEGENERATE_CONNECTOR",
                f"connector {conn.id}: {len(centroids)} endpoint candidate(s)"))
            continue

        # Farthest pair of candidates = the termini.
        best = (0, 1)
        best_d = -1.0
        for i in range(len(centroids)):
            for j in range(i + 1, len(centroids)):
                dist = math.hypot(centroids[i][0] - centroids[j][0],
                                  centroids[i][1] - centroids[j][1])
                if dist > best_d:
                    best_d = dist
                    best = (i, j)
        t1, t2 = centroids[best[0]], centroids[best[1]]

        attached = []
        ok = True
        for term in (t1, t2):
            shape = min(node_shapes, key=lambda s: point_bbox_dist(term, s.bbox))
            dist = point_bbox_dist(term, shape.bbox)
            if dist > cfg.attach_dist:
                warnings.append(Warning_(
                    "UNATTACHED_CONNECTOR",
                    f"connector {conn.id}: terminus {term} is {dist:.1f}px from any shape"))
                ok = False
                break
            attached.append(shape.id)
        if not ok:
            continue

        def near_arrow(term: Point) -> bool:
            return any(
                math.hypot(term[0] - bbox_center(a.bbox)[0],
                           term[1] - bbox_center(a.bbox)[1]) <= cfg.arrow_dist
                for a in arrows)

        a1, a2 = near_arrow(t1), near_arrow(t2)
        if a1 != a2:
            head_first = a1
        else:
            head_first = t1[1] > t2[1]
        if head_first:
            head, tail = t1, t2
            dst, src = attached[0], attached[1]
        else:
            head, tail = t2, t1
            dst, src = attached[1], attached[0]
        links.append(ConnectorLink(conn.id, src=src, dst=dst, tail=tail, head=head))
    return links, warnings


def reconstruct(
    d: DetectionFile, cfg: ReconstructConfig = ReconstructConfig()
) -> tuple[FlowGraph, list[Warning_]]:
    """Assemble a FlowGraph: absorb texts into shapes, link shapes, label edges."""
    node_shapes = [s for s in d.shapes if s.cls != ARROW]
    if not node_shapes:
        raise FlowgraphError("detection file has no shapes", code="NO_SHAPES")

    warnings: list[Warning_] = []
    absorbed: set[int] = set()
    nodes: list[FlowNode] = []
    # Reading order: top-down then left-right.
    for shape in sorted(node_shapes, key=lambda s: (s.bbox[1], s.bbox[0])):
        mine = []
        for t in d.texts:
            if t.id in absorbed:
                continue
            area = bbox_area(t.bbox)
            if area > 0 and bbox_overlap(t.bbox, shape.bbox) / area >= cfg.text_overlap:
                mine.append(t)
                absorbed.add(t.id)
        mine.sort(key=lambda t: (t.bbox[1], t.bbox[0]))
        text = " ".join(t.text for t in mine).strip()
        if not text:
            warnings.append(Warning_("EMPTY_NODE_TEXT", f"shape {shape.id} absorbed no text"))
        nodes.append(FlowNode(id=shape.id, shape_class=shape.cls, text=text, bbox=shape.bbox))
    nodes.sort(key=lambda n: n.id)

    links, link_warnings = resolve_connectors(d, cfg)
    warnings.extend(link_warnings)

    clouds = {conn.id: list(conn.points) for conn in d.connectors}
    link_by_conn = {lk.connector_id: lk for lk in links}

    # Leftover texts become edge labels if close enough to a connector.
    labels: dict[int, list[TextDet]] = {}
    for t in d.texts:
        if t.id in absorbed:
            continue
        center = bbox_center(t.bbox)
        best_conn = None
        best_dist = math.inf
        for cid, lk in link_by_conn.items():
            # Contour points are an unordered cloud, so measure against the
            # points themselves rather than pretending they form a polyline.
            dist = min(math.hypot(center[0] - px, center[1] - py)
                       for px, py in clouds[cid])
            if dist < best_dist:
                best_dist = dist
                best_conn = cid
        if best_conn is not None and best_dist <= cfg.label_dist:
            labels.setdefault(best_conn, []).append(t)
        else:
            warnings.append(Warning_("ORPHAN_TEXT", f"text {t.id} ({t.text!r}) belongs to nothing"))

    edges: list[FlowEdge] = []
    seen_edges: set[tuple[int, int, str | None]] = set()
    for lk in sorted(links, key=lambda lk: lk.connector_id):
        parts = sorted(labels.get(lk.connector_id, []), key=lambda t: (t.bbox[1], t.bbox[0]))
        label = " ".join(t.text for t in parts).strip() or None
        key = (lk.src, lk.dst, label)
        if key in seen_edges:
            continue
        seen_edges.add(key)
        edges.append(FlowEdge(src=lk.src, dst=lk.dst, label=label))

    graph = FlowGraph(nodes=tuple(nodes), edges=tuple(edges))
    graph.check()
    return graph, warnings


# ---------------------------------------------------------------------------
# JSON I/O

def detection_to_dict(d: DetectionFile) -> dict:
    return {
        "image": {"width": d.width, "height": d.height, "source": d.source},
        "shapes": [
            {"id": s.id, "class": s.cls, "bbox": list(s.bbox), "score": s.score}
            for s in d.shapes
        ],
        "connectors": [
            {"id": c.id, "points": [list(p) for p in c.points]} for c in d.connectors
        ],
        "texts": [{"id": t.id, "bbox": list(t.bbox), "text": t.text} for t in d.texts],
    }


def detection_from_dict(data: dict) -> DetectionFile:
    img = data["image"]
    d = DetectionFile(
        width=int(img["width"]),
        height=int(img["height"]),
        source=img.get("source", ""),
        shapes=tuple(
            ShapeDet(id=int(s["id"]), cls=s["class"],
                     bbox=tuple(float(v) for v in s["bbox"]),
                     score=float(s.get("score", 1.0)))
            for s in data.get("shapes", [])
        ),
        connectors=tuple(
            ConnectorDet(id=int(c["id"]),
                         points=tuple((float(x), float(y)) for x, y in c["points"]))
            for c in data.get("connectors", [])
        ),
        texts=tuple(
            TextDet(id=int(t["id"]),
                    bbox=tuple(float(v) for v in t["bbox"]),
                    text=t["text"])
            for t in data.get("texts", [])
        ),
    )
    _check_detection(d)
    return d


def _check_detection(d: DetectionFile) -> None:
    for s in d.shapes:
        x0, y0, x1, y1 = s.bbox
        if not (x0 < x1 and y0 < y1):
            raise FlowgraphError(f"shape {s.id} bbox not well ordered", code="BAD_BBOX")
        if not (0.0 <= s.score <= 1.0):
            raise FlowgraphError(f"shape {s.id} score out of range", code="BAD_SCORE")
    for c in d.connectors:
        if len(c.points) < 2:
            raise FlowgraphError(f"connector {c.id} has fewer than 2 points", code="BAD_CONNECTOR")
        for x, y in c.points:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise FlowgraphError(f"connector {c.id} has a non-finite point", code="BAD_CONNECTOR")
    for t in d.texts:
        x0, y0, x1, y1 = t.bbox
        if not (x0 < x1 and y0 < y1):
            raise FlowgraphError(f"text {t.id} bbox not well ordered", code="BAD_BBOX")


def load_detection(path: str | Path) -> DetectionFile:
    return detection_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_detection(d: DetectionFile, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(detection_to_dict(d), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")


def flowgraph_to_dict(g: FlowGraph) -> dict:
    return {
        "nodes": [
            {"id": n.id, "shape_class": n.shape_class, "text": n.text,
             "bbox": list(n.bbox), **({"is_reference": True} if n.is_reference else {})}
            for n in g.nodes
        ],
        "edges": [{"from": e.src, "to": e.dst, "label": e.label} for e in g.edges],
    }


def flowgraph_from_dict(data: dict) -> FlowGraph:
    g = FlowGraph(
        nodes=tuple(
            FlowNode(id=int(n["id"]), shape_class=n.get("shape_class", "process"),
                     text=n.get("text", ""),
                     bbox=tuple(float(v) for v in n.get("bbox", (0, 0, 1, 1))),
                     is_reference=bool(n.get("is_reference", False)))
            for n in data.get("nodes", [])
        ),
        edges=tuple(
            FlowEdge(src=int(e["from"]), dst=int(e["to"]), label=e.get("label"))
            for e in data.get("edges", [])
        ),
    )
    g.check()
    return g


def load_flowgraph(path: str | Path) -> FlowGraph:
    return flowgraph_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_flowgraph(g: FlowGraph, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(flowgraph_to_dict(g), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")
